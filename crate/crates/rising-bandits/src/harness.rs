//! Experiment runner: seeded replications in parallel, regret aggregation
//! with confidence intervals, ranking tables, and the CSV/manifest output
//! contract consumed by the CLI.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, BaselineAlgo, BaselineParams};
use crate::env::{empirical_regret, BanditEnv, Mode, PullRecord, Trajectory};
use crate::modelsel::{self, LearnerEnv, LearningRate};
use crate::payoff::{PayoffCurve, RisingReport};
use crate::policy::{OracleGreedy, Policy};
use crate::rising::{RisingConfig, RisingMode, RisingPolicy, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Rested,
    Restless,
    ModelSel,
}

/// How the per-replication environment is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvSpec {
    /// `K` random curves from the two analytic families.
    SyntheticSuite { suite_seed: u64 },
    /// Constant-vs-step two-armed instance (rested).
    Nonlearnable { gamma_max: f64 },
    /// Fast-low-plateau vs slow-high-plateau crossing instance (rested).
    Crossing,
    /// Explicit curve list.
    Curves { curves: Vec<PayoffCurve> },
    /// Sparse labeled-example file for model selection.
    Stream { path: String, d: usize },
    /// Built-in separable blob stream for model selection.
    SyntheticStream { n: usize, d: usize, margin: f64, stream_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicySpec {
    Rising {
        mode: RisingMode,
        #[serde(default)]
        deterministic: bool,
        /// Overrides the experiment-level epsilon when set.
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        label: Option<String>,
    },
    Baseline { algo: BaselineAlgo },
    OracleGreedy,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub k: usize,
    pub t: usize,
    pub replications: usize,
    pub sigma: f64,
    /// Window fraction shared by the rising policies (per-policy override in PolicySpec).
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub policies: Vec<PolicySpec>,
    pub environment: EnvSpec,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Learner arms for the model-selection setting.
    #[serde(default)]
    pub learner_arms: Option<Vec<LearningRate>>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Curve(#[from] crate::payoff::CurveError),
    #[error(transparent)]
    Rising(#[from] crate::rising::RisingConfigError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Stream(#[from] crate::modelsel::StreamError),
    #[error("replication curves have unequal lengths")]
    RaggedCurves,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-policy aggregate regret with 95% confidence half-widths.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    pub replications: usize,
    /// Set when a single replication makes the CI degenerate.
    pub single_replication: bool,
}

/// Raw output of `run_experiment`, indexed `[policy][replication]`.
pub struct ExperimentResult {
    pub policy_labels: Vec<String>,
    pub regret: Vec<Vec<Vec<f64>>>,
    pub pull_counts: Vec<Vec<Vec<u64>>>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derivation: the noise stream depends on (master, rep)
/// only, so every policy in a replication sees the same reward noise (common
/// random numbers); policy-internal randomness also keys on the policy slot.
fn derive_seed(master: u64, salt: &[u64]) -> u64 {
    let mut z = master;
    for &s in salt {
        z = splitmix64(z ^ s.wrapping_mul(GOLDEN));
    }
    z
}

pub fn env_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[1, rep as u64])
}

pub fn policy_seed(master: u64, rep: usize, policy: usize) -> u64 {
    derive_seed(master, &[2, rep as u64, policy as u64])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn mode(&self) -> Mode {
        match self.setting {
            Setting::Restless => Mode::Restless,
            _ => Mode::Rested,
        }
    }

    /// Builds the (replication-independent) curve set for curve-based settings.
    pub fn curves(&self) -> Result<Vec<PayoffCurve>, HarnessError> {
        let curves = match &self.environment {
            EnvSpec::SyntheticSuite { suite_seed } => {
                crate::env::make_synthetic_suite(self.k, *suite_seed)
            }
            EnvSpec::Nonlearnable { gamma_max } => {
                crate::env::make_nonlearnable_instance(self.t, *gamma_max).curves().to_vec()
            }
            EnvSpec::Crossing => crate::env::make_crossing_curves(self.t),
            EnvSpec::Curves { curves } => curves.clone(),
            other => {
                return Err(HarnessError::Config(format!(
                    "environment {other:?} has no payoff curves; use the model_sel setting"
                )))
            }
        };
        if curves.len() != self.k {
            return Err(HarnessError::Config(format!(
                "environment yields {} arms but k = {}",
                curves.len(),
                self.k
            )));
        }
        Ok(curves)
    }

    fn learner_schemes(&self) -> Result<Vec<LearningRate>, HarnessError> {
        let schemes = self
            .learner_arms
            .clone()
            .ok_or_else(|| HarnessError::Config("model_sel setting needs learner_arms".into()))?;
        if schemes.len() != self.k {
            return Err(HarnessError::Config(format!(
                "{} learner arms but k = {}",
                schemes.len(),
                self.k
            )));
        }
        Ok(schemes)
    }

    fn stream(&self) -> Result<Arc<modelsel::LabeledStream>, HarnessError> {
        Ok(Arc::new(match &self.environment {
            EnvSpec::Stream { path, d } => modelsel::load_stream(path, *d)?,
            EnvSpec::SyntheticStream { n, d, margin, stream_seed } => {
                modelsel::synthetic_stream(*n, *d, *margin, *stream_seed)
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "model_sel setting needs a stream environment, got {other:?}"
                )))
            }
        }))
    }

    /// Structural validation plus policy construction dry-run; returns the
    /// assumption report of every configured arm for curve-based settings.
    pub fn validate(&self) -> Result<Vec<RisingReport>, HarnessError> {
        if self.t < 1 || self.replications < 1 || self.k < 1 {
            return Err(HarnessError::Config("t, k, replications must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(HarnessError::Config(format!("epsilon = {} outside (0, 1/2)", self.epsilon)));
        }
        if !(self.alpha > 2.0) {
            return Err(HarnessError::Config(format!("alpha = {} must exceed 2", self.alpha)));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Config("no policies configured".into()));
        }
        // dry-run every policy constructor so bad combinations fail before
        // any simulation
        for (slot, _) in self.policies.iter().enumerate() {
            self.build_policy(slot, &[], 0)?;
        }
        match self.setting {
            Setting::ModelSel => {
                self.learner_schemes()?;
                self.stream()?;
                Ok(Vec::new())
            }
            _ => {
                let curves = self.curves()?;
                Ok(curves.iter().map(|c| c.check_rising(self.t.max(2))).collect())
            }
        }
    }

    fn build_policy(
        &self,
        slot: usize,
        curves: &[PayoffCurve],
        rep: usize,
    ) -> Result<Box<dyn Policy>, HarnessError> {
        let seed = policy_seed(self.seed, rep, slot);
        Ok(match &self.policies[slot] {
            PolicySpec::Rising { mode, deterministic, epsilon, label } => {
                let eps = epsilon.unwrap_or(self.epsilon);
                let config = RisingConfig::new(eps, self.alpha, self.sigma, *mode, *deterministic)?;
                let policy = RisingPolicy::new(config, self.k, seed);
                Box::new(match label {
                    Some(l) => policy.with_label(l.clone()),
                    None => policy,
                })
            }
            PolicySpec::Baseline { algo } => {
                let params = baselines::default_params(*algo, self.k, self.t, self.sigma)?;
                self.instantiate_baseline(*algo, &params, seed)
            }
            PolicySpec::OracleGreedy => {
                if self.setting != Setting::Restless {
                    return Err(HarnessError::Config(
                        "oracle-greedy is a restless reference policy".into(),
                    ));
                }
                Box::new(OracleGreedy::new(curves.to_vec()))
            }
        })
    }

    fn instantiate_baseline(
        &self,
        algo: BaselineAlgo,
        params: &BaselineParams,
        seed: u64,
    ) -> Box<dyn Policy> {
        match algo {
            BaselineAlgo::Rexp3 => Box::new(baselines::Rexp3::new(params, self.k, seed)),
            BaselineAlgo::KlUcb => Box::new(baselines::KlUcb::new(params, self.k)),
            BaselineAlgo::Ser4 => Box::new(baselines::Ser4::new(params, self.k, self.t, seed)),
            BaselineAlgo::SwUcb => Box::new(baselines::SwUcb::new(params, self.k)),
            BaselineAlgo::SwKlUcb => Box::new(baselines::SwKlUcb::new(params, self.k)),
            BaselineAlgo::SwTs => Box::new(baselines::SwTs::new(params, self.k, seed)),
        }
    }

    pub fn policy_labels(&self) -> Result<Vec<String>, HarnessError> {
        let mut labels = Vec::with_capacity(self.policies.len());
        for slot in 0..self.policies.len() {
            let label = self.build_policy(slot, &[], 0)?.name().to_string();
            labels.push(label);
        }
        // duplicate labels would collide in the CSV; disambiguate by order
        let mut seen = std::collections::HashMap::new();
        for label in labels.iter_mut() {
            let count = seen.entry(label.clone()).or_insert(0usize);
            *count += 1;
            if *count > 1 {
                *label = format!("{label}-{count}");
            }
        }
        Ok(labels)
    }
}

fn run_replication_curve(
    config: &ExperimentConfig,
    curves: &[PayoffCurve],
    rep: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<u64>>), HarnessError> {
    let mode = config.mode();
    let noise_seed = env_seed(config.seed, rep);
    let mut regrets = Vec::with_capacity(config.policies.len());
    let mut counts = Vec::with_capacity(config.policies.len());
    for slot in 0..config.policies.len() {
        let mut env = BanditEnv::new(mode, curves.to_vec(), config.sigma, noise_seed);
        let mut policy = config.build_policy(slot, curves, rep)?;
        let mut traj = Trajectory::default();
        for t in 1..=config.t {
            let arm = policy.select_arm(t);
            let (reward, expected) = env
                .pull(arm, t)
                .map_err(|e| HarnessError::Config(format!("protocol violation: {e}")))?;
            policy.update(arm, reward, t);
            traj.push(PullRecord { round: t, arm, reward, expected });
        }
        let regret = empirical_regret(&traj, mode, curves, config.t)
            .map_err(|e| HarnessError::Config(format!("regret accounting: {e}")))?;
        let mut pulls = vec![0u64; config.k];
        for p in &traj.pulls {
            pulls[p.arm] += 1;
        }
        regrets.push(regret);
        counts.push(pulls);
    }
    Ok((regrets, counts))
}

fn run_replication_modelsel(
    config: &ExperimentConfig,
    stream: &Arc<modelsel::LabeledStream>,
    schemes: &[LearningRate],
    rep: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<u64>>), HarnessError> {
    let draw_seed = env_seed(config.seed, rep);
    let mut regrets = Vec::with_capacity(config.policies.len());
    let mut counts = Vec::with_capacity(config.policies.len());
    for slot in 0..config.policies.len() {
        let mut env = LearnerEnv::new(Arc::clone(stream), schemes, config.t, draw_seed)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut policy = config.build_policy(slot, &[], rep)?;
        // regret here is the cumulative mistake count: reward is accuracy in
        // {0, 1} and no payoff oracle exists for learner arms
        let mut curve = Vec::with_capacity(config.t);
        let mut pulls = vec![0u64; config.k];
        let mut mistakes = 0.0;
        for t in 1..=config.t {
            let arm = policy.select_arm(t);
            let reward = env.pull(arm, t).map_err(|e| HarnessError::Config(e.to_string()))?;
            policy.update(arm, reward, t);
            mistakes += 1.0 - reward;
            curve.push(mistakes);
            pulls[arm] += 1;
        }
        regrets.push(curve);
        counts.push(pulls);
    }
    Ok((regrets, counts))
}

/// Runs every (replication, policy) pair. Replications execute in parallel
/// but results are collected in replication order, so the output is a pure
/// function of (config, seed) regardless of thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let labels = config.policy_labels()?;
    let per_rep: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<u64>>), HarnessError>> =
        match config.setting {
            Setting::ModelSel => {
                let stream = config.stream()?;
                let schemes = config.learner_schemes()?;
                (0..config.replications)
                    .into_par_iter()
                    .map(|rep| run_replication_modelsel(config, &stream, &schemes, rep))
                    .collect()
            }
            _ => {
                let curves = config.curves()?;
                (0..config.replications)
                    .into_par_iter()
                    .map(|rep| run_replication_curve(config, &curves, rep))
                    .collect()
            }
        };
    let mut regret = vec![Vec::with_capacity(config.replications); config.policies.len()];
    let mut pull_counts = vec![Vec::with_capacity(config.replications); config.policies.len()];
    for rep_result in per_rep {
        let (regrets, counts) = rep_result?;
        for (slot, r) in regrets.into_iter().enumerate() {
            regret[slot].push(r);
        }
        for (slot, c) in counts.into_iter().enumerate() {
            pull_counts[slot].push(c);
        }
    }
    Ok(ExperimentResult { policy_labels: labels, regret, pull_counts })
}

/// Runs the experiment inside a dedicated thread pool of the given size.
pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentResult, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| run_experiment(config))
}

/// Mean curve with 95% CI half-widths (`1.96 s / sqrt(R)`).
pub fn aggregate(runs: &[Vec<f64>]) -> Result<AggregateCurve, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::Config("aggregate needs at least one replication".into()));
    }
    let len = runs[0].len();
    if runs.iter().any(|r| r.len() != len) {
        return Err(HarnessError::RaggedCurves);
    }
    let reps = runs.len();
    let mut mean = vec![0.0; len];
    let mut half = vec![0.0; len];
    for t in 0..len {
        let m = runs.iter().map(|r| r[t]).sum::<f64>() / reps as f64;
        mean[t] = m;
        if reps > 1 {
            let var =
                runs.iter().map(|r| (r[t] - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            half[t] = 1.96 * var.sqrt() / (reps as f64).sqrt();
        }
    }
    Ok(AggregateCurve { mean, ci_half_width: half, replications: reps, single_replication: reps == 1 })
}

/// Average-rank table: per scenario, rank 1 goes to the lowest final regret
/// and ties share the mean of their positions; returns (mean rank, 95% CI
/// half-width) per policy.
pub fn rank_algorithms(final_regrets: &[Vec<f64>]) -> Vec<(f64, f64)> {
    assert!(!final_regrets.is_empty());
    let policies = final_regrets[0].len();
    assert!(final_regrets.iter().all(|s| s.len() == policies));
    let scenarios = final_regrets.len();
    let mut ranks = vec![Vec::with_capacity(scenarios); policies];
    for scenario in final_regrets {
        let mut order: Vec<usize> = (0..policies).collect();
        order.sort_by(|&a, &b| scenario[a].total_cmp(&scenario[b]));
        let mut pos = 0;
        while pos < policies {
            let mut end = pos + 1;
            while end < policies && scenario[order[end]] == scenario[order[pos]] {
                end += 1;
            }
            // positions pos..end tie; share the average 1-based rank
            let shared = (pos + 1 + end) as f64 / 2.0;
            for &p in &order[pos..end] {
                ranks[p].push(shared);
            }
            pos = end;
        }
    }
    ranks
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            let half = if r.len() > 1 {
                let var = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() as f64 - 1.0);
                1.96 * var.sqrt() / (r.len() as f64).sqrt()
            } else {
                0.0
            };
            (m, half)
        })
        .collect()
}

/// Rounds reported in `results.csv`: every `max(1, T/1000)`-th round plus the
/// final round.
pub fn subsample_rounds(t: usize) -> Vec<usize> {
    let stride = (t / 1000).max(1);
    let mut rounds: Vec<usize> = (stride..=t).step_by(stride).collect();
    if rounds.last() != Some(&t) {
        rounds.push(t);
    }
    rounds
}

/// Writes `results.csv`, `final.csv`, and `manifest.json` into `out_dir`.
pub fn write_outputs(
    config: &ExperimentConfig,
    result: &ExperimentResult,
    out_dir: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let aggregates: Vec<AggregateCurve> = result
        .regret
        .iter()
        .map(|runs| aggregate(runs))
        .collect::<Result<_, _>>()?;

    let mut results = String::from("t,policy,mean_regret,ci_low,ci_high\n");
    for &t in &subsample_rounds(config.t) {
        for (label, agg) in result.policy_labels.iter().zip(&aggregates) {
            let m = agg.mean[t - 1];
            let h = agg.ci_half_width[t - 1];
            results.push_str(&format!("{t},{label},{m},{},{}\n", m - h, m + h));
        }
    }
    std::fs::write(out_dir.join("results.csv"), results)?;

    let mut finals = String::from("policy,mean_regret,ci_low,ci_high\n");
    for (label, agg) in result.policy_labels.iter().zip(&aggregates) {
        let m = agg.mean[config.t - 1];
        let h = agg.ci_half_width[config.t - 1];
        finals.push_str(&format!("{label},{m},{},{}\n", m - h, m + h));
    }
    std::fs::write(out_dir.join("final.csv"), finals)?;

    let manifest = serde_json::json!({
        "config": config,
        "policies": result.policy_labels,
        "env_seeds": (0..config.replications).map(|r| env_seed(config.seed, r)).collect::<Vec<_>>(),
        "subsample_stride": (config.t / 1000).max(1),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut file = std::fs::File::create(out_dir.join("manifest.json"))?;
    writeln!(file, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
