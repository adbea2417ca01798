//! Rested and restless bandit environments with Gaussian noise, oracle
//! values, regret accounting, and the named instances used by the
//! experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::payoff::PayoffCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Payoff of an arm depends only on how many times it has been pulled.
    Rested,
    /// Payoff depends only on the calendar round.
    Restless,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("round {got} out of sequence; expected {expected}")]
    OutOfSequence { got: usize, expected: usize },
    #[error("trajectory has {got} pulls but horizon is {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// One served pull.
#[derive(Debug, Clone, PartialEq)]
pub struct PullRecord {
    pub round: usize,
    pub arm: usize,
    pub reward: f64,
    /// Expected payoff at the point actually served.
    pub expected: f64,
}

/// Full pull history of one run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub pulls: Vec<PullRecord>,
}

impl Trajectory {
    pub fn push(&mut self, record: PullRecord) {
        debug_assert_eq!(record.round, self.pulls.len() + 1);
        self.pulls.push(record);
    }

    pub fn len(&self) -> usize {
        self.pulls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulls.is_empty()
    }
}

/// A rested or restless environment owned by a single replication.
///
/// Noise is a per-round Gaussian stream drawn from the environment's own RNG,
/// one draw per pull regardless of which arm is chosen, so two policies run
/// against identically seeded environments see the same noise realization
/// (common random numbers).
#[derive(Debug, Clone)]
pub struct BanditEnv {
    mode: Mode,
    curves: Vec<PayoffCurve>,
    sigma: f64,
    pull_counts: Vec<u64>,
    served: usize,
    rng: ChaCha8Rng,
}

impl BanditEnv {
    pub fn new(mode: Mode, curves: Vec<PayoffCurve>, sigma: f64, seed: u64) -> Self {
        assert!(!curves.is_empty(), "environment needs at least one arm");
        assert!(sigma >= 0.0, "noise scale must be non-negative");
        let arms = curves.len();
        Self {
            mode,
            curves,
            sigma,
            pull_counts: vec![0; arms],
            served: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn arms(&self) -> usize {
        self.curves.len()
    }

    pub fn curves(&self) -> &[PayoffCurve] {
        &self.curves
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pull_count(&self, arm: usize) -> u64 {
        self.pull_counts[arm]
    }

    /// Serves one pull at round `t`, returning the noisy reward and the
    /// expected payoff at the served point. Rounds must arrive strictly in
    /// sequence starting from 1.
    pub fn pull(&mut self, arm: usize, t: usize) -> Result<(f64, f64), EnvError> {
        if arm >= self.curves.len() {
            return Err(EnvError::ArmOutOfRange { arm, arms: self.curves.len() });
        }
        if t != self.served + 1 {
            return Err(EnvError::OutOfSequence { got: t, expected: self.served + 1 });
        }
        let noise: f64 = self.rng.sample(StandardNormal);
        let expected = match self.mode {
            Mode::Rested => self.curves[arm].eval(self.pull_counts[arm] as usize + 1),
            Mode::Restless => self.curves[arm].eval(t),
        };
        self.pull_counts[arm] += 1;
        self.served = t;
        // rewards are not clipped; only payoffs are bounded in [0, 1]
        Ok((expected + self.sigma * noise, expected))
    }
}

/// Cumulative payoff of the optimal oracle over horizon `T`: the best constant
/// arm in the rested case, the per-round greedy maximum in the restless case.
pub fn oracle_value(mode: Mode, curves: &[PayoffCurve], horizon: usize) -> f64 {
    assert!(horizon >= 1);
    match mode {
        Mode::Rested => curves
            .iter()
            .map(|c| (1..=horizon).map(|l| c.eval(l)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max),
        Mode::Restless => (1..=horizon)
            .map(|t| curves.iter().map(|c| c.eval(t)).fold(f64::NEG_INFINITY, f64::max))
            .sum(),
    }
}

/// Index of the oracle constant arm at horizon `T` (rested), lowest index on
/// ties.
pub fn oracle_constant_arm(curves: &[PayoffCurve], horizon: usize) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, c) in curves.iter().enumerate() {
        let value = (1..=horizon).map(|l| c.eval(l)).sum::<f64>();
        if value > best_value {
            best_value = value;
            best = i;
        }
    }
    best
}

/// Per-round empirical cumulative regret of a trajectory, computed with the
/// true payoff functions (never the realized rewards).
///
/// In the rested case the partial oracle uses the arm that is optimal at the
/// full horizon, so the final entry matches the regret definition exactly and
/// intermediate entries may be negative.
pub fn empirical_regret(
    traj: &Trajectory,
    mode: Mode,
    curves: &[PayoffCurve],
    horizon: usize,
) -> Result<Vec<f64>, EnvError> {
    if traj.len() != horizon {
        return Err(EnvError::LengthMismatch { got: traj.len(), expected: horizon });
    }
    let mut curve = Vec::with_capacity(horizon);
    let mut cum = 0.0;
    match mode {
        Mode::Rested => {
            let star = oracle_constant_arm(curves, horizon);
            for (idx, pull) in traj.pulls.iter().enumerate() {
                cum += curves[star].eval(idx + 1) - pull.expected;
                curve.push(cum);
            }
        }
        Mode::Restless => {
            for (idx, pull) in traj.pulls.iter().enumerate() {
                let best = curves
                    .iter()
                    .map(|c| c.eval(idx + 1))
                    .fold(f64::NEG_INFINITY, f64::max);
                cum += best - pull.expected;
                curve.push(cum);
            }
        }
    }
    Ok(curve)
}

/// Draws `K` curves from the exponential/polynomial families, each family
/// with probability 1/2, parameters uniform in their ranges. `b` is sampled
/// uniformly in `[0, b_max]`.
pub fn make_synthetic_suite_with_bmax(k: usize, seed: u64, b_max: f64) -> Vec<PayoffCurve> {
    assert!(k >= 2, "suite needs at least two arms");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves = Vec::with_capacity(k);
    for _ in 0..k {
        let exponential: bool = rng.gen_bool(0.5);
        // open-interval draws: gen::<f64>() is in [0, 1); map to (0, 1]
        let c = 1.0 - rng.gen::<f64>();
        if exponential {
            let a = 1.0 - rng.gen::<f64>();
            curves.push(PayoffCurve::exponential(c, a).expect("sampled in range"));
        } else {
            let rho = 1.0 - rng.gen::<f64>();
            let b = rng.gen::<f64>() * b_max;
            curves.push(PayoffCurve::polynomial(c, b, rho).expect("sampled in range"));
        }
    }
    curves
}

pub const DEFAULT_B_MAX: f64 = 1000.0;

pub fn make_synthetic_suite(k: usize, seed: u64) -> Vec<PayoffCurve> {
    make_synthetic_suite_with_bmax(k, seed, DEFAULT_B_MAX)
}

/// The two-armed non-decreasing, non-concave instance on which no learner can
/// avoid linear regret: a constant arm at `gamma_max / 2` against a step arm
/// that jumps from 0 to `gamma_max` after `floor(T/3)` pulls.
pub fn make_nonlearnable_instance(horizon: usize, gamma_max: f64) -> BanditEnv {
    assert!(horizon >= 3);
    assert!(gamma_max > 0.0 && gamma_max <= 1.0);
    let curves = vec![
        PayoffCurve::constant(gamma_max / 2.0).expect("in range"),
        PayoffCurve::step(0.0, gamma_max, horizon / 3).expect("in range"),
    ];
    BanditEnv::new(Mode::Rested, curves, 0.0, 0)
}

/// Two-armed rested instance whose optimal arm reveals itself only after a
/// number of pulls linear in `T`: a fast exponential rise to a 0.4 plateau
/// against a slow linear climb capped at 0.9. The curves cross near
/// `0.222 T` pulls.
pub fn make_crossing_curves(horizon: usize) -> Vec<PayoffCurve> {
    assert!(horizon >= 400);
    let t = horizon as f64;
    vec![
        PayoffCurve::exponential(0.4, (100.0 / t).min(1.0)).expect("in range"),
        PayoffCurve::piecewise_linear_cap(1.8 / t, 0.9).expect("in range"),
    ]
}

pub fn make_crossing_instance(horizon: usize, sigma: f64, seed: u64) -> BanditEnv {
    BanditEnv::new(Mode::Rested, make_crossing_curves(horizon), sigma, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_fixed(env: &mut BanditEnv, arms: &[usize]) -> Trajectory {
        let mut traj = Trajectory::default();
        for (idx, &arm) in arms.iter().enumerate() {
            let t = idx + 1;
            let (reward, expected) = env.pull(arm, t).unwrap();
            traj.push(PullRecord { round: t, arm, reward, expected });
        }
        traj
    }

    #[test]
    fn rested_step_counts_pulls() {
        let curves = vec![PayoffCurve::step(0.0, 1.0, 4).unwrap()];
        let mut env = BanditEnv::new(Mode::Rested, curves, 0.0, 1);
        let traj = run_fixed(&mut env, &[0; 6]);
        assert_eq!(traj.pulls[3].expected, 0.0);
        assert_eq!(traj.pulls[4].expected, 1.0);
    }

    #[test]
    fn restless_constant_noiseless() {
        let curves = vec![PayoffCurve::constant(0.5).unwrap()];
        let mut env = BanditEnv::new(Mode::Restless, curves, 0.0, 1);
        for t in 1..=5 {
            let (reward, expected) = env.pull(0, t).unwrap();
            assert_eq!(reward, 0.5);
            assert_eq!(expected, 0.5);
        }
    }

    #[test]
    fn rested_first_pull_exponential() {
        let curves = vec![PayoffCurve::exponential(1.0, std::f64::consts::LN_2).unwrap()];
        let mut env = BanditEnv::new(Mode::Rested, curves, 0.0, 1);
        let (_, expected) = env.pull(0, 1).unwrap();
        assert!((expected - 0.5).abs() < 1e-12);
    }

    #[test]
    fn protocol_errors() {
        let curves = vec![PayoffCurve::constant(0.5).unwrap()];
        let mut env = BanditEnv::new(Mode::Rested, curves, 0.0, 1);
        assert_eq!(env.pull(1, 1), Err(EnvError::ArmOutOfRange { arm: 1, arms: 1 }));
        assert_eq!(env.pull(0, 2), Err(EnvError::OutOfSequence { got: 2, expected: 1 }));
        env.pull(0, 1).unwrap();
        assert_eq!(env.pull(0, 1), Err(EnvError::OutOfSequence { got: 1, expected: 2 }));
    }

    #[test]
    fn oracle_values_nonlearnable() {
        let env = make_nonlearnable_instance(12, 1.0);
        assert_eq!(oracle_value(Mode::Rested, env.curves(), 12), 8.0);
        let curves_b = vec![
            PayoffCurve::constant(0.5).unwrap(),
            PayoffCurve::constant(0.0).unwrap(),
        ];
        assert_eq!(oracle_value(Mode::Rested, &curves_b, 12), 6.0);
    }

    #[test]
    fn oracle_value_restless_greedy() {
        let tab: Vec<f64> = (1..=3).map(|t| t as f64 / 10.0).collect();
        let curves = vec![
            PayoffCurve::constant(0.5).unwrap(),
            PayoffCurve::tabulated(tab).unwrap(),
        ];
        assert!((oracle_value(Mode::Restless, &curves, 3) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn regret_restless_always_worse_arm() {
        let tab: Vec<f64> = (1..=3).map(|t| t as f64 / 10.0).collect();
        let curves = vec![
            PayoffCurve::constant(0.5).unwrap(),
            PayoffCurve::tabulated(tab).unwrap(),
        ];
        let mut env = BanditEnv::new(Mode::Restless, curves.clone(), 0.0, 3);
        let traj = run_fixed(&mut env, &[1, 1, 1]);
        let regret = empirical_regret(&traj, Mode::Restless, &curves, 3).unwrap();
        assert!((regret[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn regret_single_arm_rested_is_zero() {
        let curves = vec![PayoffCurve::exponential(0.7, 0.3).unwrap()];
        let mut env = BanditEnv::new(Mode::Rested, curves.clone(), 0.0, 9);
        let traj = run_fixed(&mut env, &[0; 20]);
        let regret = empirical_regret(&traj, Mode::Rested, &curves, 20).unwrap();
        assert!(regret.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn regret_length_mismatch() {
        let curves = vec![PayoffCurve::constant(0.5).unwrap()];
        let traj = Trajectory::default();
        assert!(matches!(
            empirical_regret(&traj, Mode::Rested, &curves, 4),
            Err(EnvError::LengthMismatch { got: 0, expected: 4 })
        ));
    }

    #[test]
    fn synthetic_suite_deterministic_and_rising() {
        let a = make_synthetic_suite(15, 77);
        let b = make_synthetic_suite(15, 77);
        assert_eq!(a, b);
        for curve in &a {
            let report = curve.check_rising(5000);
            assert!(report.is_rising(), "suite curve violates assumptions: {curve:?}");
            match curve {
                PayoffCurve::Exponential { c, .. } | PayoffCurve::Polynomial { c, .. } => {
                    assert!(*c <= 1.0)
                }
                _ => panic!("unexpected kind in suite"),
            }
        }
    }

    #[test]
    fn rested_replay_invariance() {
        // same per-arm pull ordinal gives the same expected payoff whatever
        // the calendar schedule
        let curves = vec![
            PayoffCurve::exponential(0.9, 0.2).unwrap(),
            PayoffCurve::polynomial(0.8, 5.0, 0.5).unwrap(),
        ];
        let mut interleaved = BanditEnv::new(Mode::Rested, curves.clone(), 0.0, 5);
        let mut blocked = BanditEnv::new(Mode::Rested, curves.clone(), 0.0, 6);
        let t1 = run_fixed(&mut interleaved, &[0, 1, 0, 1, 0, 1]);
        let t2 = run_fixed(&mut blocked, &[0, 0, 0, 1, 1, 1]);
        for n in 0..3 {
            let a1: Vec<f64> = t1.pulls.iter().filter(|p| p.arm == 0).map(|p| p.expected).collect();
            let a2: Vec<f64> = t2.pulls.iter().filter(|p| p.arm == 0).map(|p| p.expected).collect();
            assert_eq!(a1[n], a2[n]);
        }
    }

    #[test]
    fn restless_schedule_invariance() {
        let curves = vec![
            PayoffCurve::exponential(0.9, 0.2).unwrap(),
            PayoffCurve::polynomial(0.8, 5.0, 0.5).unwrap(),
        ];
        let mut a = BanditEnv::new(Mode::Restless, curves.clone(), 0.0, 5);
        let mut b = BanditEnv::new(Mode::Restless, curves.clone(), 0.0, 6);
        // arm 0 pulled at round 4 after different histories
        run_fixed(&mut a, &[0, 0, 0]);
        run_fixed(&mut b, &[1, 1, 1]);
        let (_, e1) = a.pull(0, 4).unwrap();
        let (_, e2) = b.pull(0, 4).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn identical_seeds_identical_rewards() {
        let curves = make_synthetic_suite(3, 11);
        let mut a = BanditEnv::new(Mode::Restless, curves.clone(), 0.1, 42);
        let mut b = BanditEnv::new(Mode::Restless, curves, 0.1, 42);
        for t in 1..=50 {
            let arm = t % 3;
            assert_eq!(a.pull(arm, t).unwrap(), b.pull(arm, t).unwrap());
        }
    }

    #[test]
    fn crossing_instance_shape() {
        let horizon = 4000;
        let curves = make_crossing_curves(horizon);
        for c in &curves {
            assert!(c.check_rising(horizon).is_rising());
        }
        // arm 2 overtakes arm 1 near 0.222 T pulls
        let n_star = (0.4_f64 / (1.8 / horizon as f64)).ceil() as usize;
        assert!((n_star as f64 - 0.222 * horizon as f64).abs() < 0.01 * horizon as f64);
        assert!(curves[1].eval(n_star + 50) > curves[0].eval(n_star + 50));
    }
}
