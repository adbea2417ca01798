use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rising_bandits::harness::{
    rank_algorithms, run_experiment_with_threads, write_outputs, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "rising-bandits", about = "Simulator for rising bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Output directory (default: config's out_dir, then ./results).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rank policies by final regret across previously produced result dirs.
    Rank {
        #[arg(required = true)]
        results_dirs: Vec<PathBuf>,
    },
    /// Check a config file and report assumption compliance of its curves.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { config, seed, reps, out, threads } => {
            let mut config = ExperimentConfig::load(&config).map_err(|e| e.to_string())?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(reps) = reps {
                config.replications = reps;
            }
            let out_dir = out
                .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results"));
            let threads = threads.unwrap_or(0); // 0 = rayon default
            let result =
                run_experiment_with_threads(&config, threads).map_err(|e| e.to_string())?;
            write_outputs(&config, &result, &out_dir).map_err(|e| e.to_string())?;
            println!("wrote {}", out_dir.display());
            for (label, runs) in result.policy_labels.iter().zip(&result.regret) {
                let final_mean = runs.iter().map(|r| r[r.len() - 1]).sum::<f64>() / runs.len() as f64;
                println!("{label}: final mean regret {final_mean:.4}");
            }
            Ok(())
        }
        Command::Rank { results_dirs } => {
            let mut labels: Vec<String> = Vec::new();
            let mut matrix: Vec<Vec<f64>> = Vec::new();
            for dir in &results_dirs {
                let text = std::fs::read_to_string(dir.join("final.csv"))
                    .map_err(|e| format!("{}: {e}", dir.display()))?;
                let mut scenario_labels = Vec::new();
                let mut scenario = Vec::new();
                for line in text.lines().skip(1) {
                    let mut fields = line.split(',');
                    let label = fields
                        .next()
                        .ok_or_else(|| format!("{}: malformed final.csv", dir.display()))?;
                    let value: f64 = fields
                        .next()
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| format!("{}: malformed final.csv", dir.display()))?;
                    scenario_labels.push(label.to_string());
                    scenario.push(value);
                }
                if labels.is_empty() {
                    labels = scenario_labels;
                } else if labels != scenario_labels {
                    return Err(format!(
                        "{}: policy set differs from {}",
                        dir.display(),
                        results_dirs[0].display()
                    ));
                }
                matrix.push(scenario);
            }
            println!("policy,mean_rank,ci_half_width");
            for (label, (mean, half)) in labels.iter().zip(rank_algorithms(&matrix)) {
                println!("{label},{mean},{half}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let config = ExperimentConfig::load(&config).map_err(|e| e.to_string())?;
            let reports = config.validate().map_err(|e| e.to_string())?;
            if reports.is_empty() {
                println!("config ok (no payoff curves to check)");
            } else {
                for (arm, report) in reports.iter().enumerate() {
                    println!(
                        "arm {arm}: {}",
                        serde_json::to_string(report).map_err(|e| e.to_string())?
                    );
                }
                let bad = reports.iter().filter(|r| !r.is_rising()).count();
                if bad > 0 {
                    return Err(format!("{bad} arm(s) violate the rising assumptions"));
                }
                println!("config ok");
            }
            Ok(())
        }
    }
}
