//! Optimistic policies for rising bandits: sliding-window estimators for the
//! rested and restless settings, their deterministic counterparts, the
//! heuristic restless variant, and the constant-time accumulator update.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::Policy;

/// Which estimator family the policy runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisingMode {
    Rested,
    Restless,
    RestlessHeuristic,
}

#[derive(Debug, Error, PartialEq)]
pub enum RisingConfigError {
    #[error("epsilon = {0} outside (0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error("alpha = {0} must exceed 2")]
    AlphaOutOfRange(f64),
    #[error("sigma = {0} must be non-negative")]
    SigmaOutOfRange(f64),
    #[error("the heuristic estimator has no deterministic form")]
    HeuristicDeterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisingConfig {
    /// Window fraction: the estimator uses the last `floor(epsilon * n)` pulls.
    pub epsilon: f64,
    /// Confidence schedule exponent, `delta_t = t^{-alpha}`.
    pub alpha: f64,
    /// Known noise scale fed to the exploration bonus.
    pub sigma: f64,
    pub mode: RisingMode,
    /// Deterministic-setting variant: last-observation index, no bonus.
    #[serde(default)]
    pub deterministic: bool,
}

impl RisingConfig {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        sigma: f64,
        mode: RisingMode,
        deterministic: bool,
    ) -> Result<Self, RisingConfigError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(RisingConfigError::EpsilonOutOfRange(epsilon));
        }
        if !(alpha > 2.0) {
            return Err(RisingConfigError::AlphaOutOfRange(alpha));
        }
        if !(sigma >= 0.0) {
            return Err(RisingConfigError::SigmaOutOfRange(sigma));
        }
        if deterministic && mode == RisingMode::RestlessHeuristic {
            return Err(RisingConfigError::HeuristicDeterministic);
        }
        Ok(Self { epsilon, alpha, sigma, mode, deterministic })
    }

    pub fn stochastic(epsilon: f64, alpha: f64, sigma: f64, mode: RisingMode) -> Result<Self, RisingConfigError> {
        Self::new(epsilon, alpha, sigma, mode, false)
    }
}

/// Default confidence exponent; the theory requires only `alpha > 2`.
pub const DEFAULT_ALPHA: f64 = 3.0;

/// Window size schedule `h = floor(epsilon * n)`.
pub fn window_size(n: usize, epsilon: f64) -> usize {
    debug_assert!(epsilon > 0.0 && epsilon < 0.5);
    (epsilon * n as f64).floor() as usize
}

/// Deterministic rested index: last payoff plus the last increment projected
/// `t - n` pulls ahead. `+inf` with fewer than two pulls.
pub fn red_det_index(mu_last: f64, gamma_last: f64, n: usize, t: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    mu_last + (t - n) as f64 * gamma_last
}

/// Deterministic restless index: linear extrapolation through the last two
/// observations. `+inf` with fewer than two pulls (`t_prev = 0` sentinel).
pub fn rless_det_index(mu_last: f64, mu_prev: f64, t_last: usize, t_prev: usize, t: usize) -> f64 {
    if t_prev == 0 && t_last == 0 {
        return f64::INFINITY;
    }
    debug_assert!(t_prev < t_last && t_last < t);
    mu_last + (t - t_last) as f64 * (mu_last - mu_prev) / (t_last - t_prev) as f64
}

/// Per-arm pull history with the four running sums that make the windowed
/// estimate O(1) per update:
///
/// - `acc_a = sum_{l=n-h+1}^{n} R_l`
/// - `acc_b = sum_{l=n-2h+1}^{n-h} R_l`
/// - `acc_c = sum_{l=n-h+1}^{n} l * R_l`
/// - `acc_d = sum_{l=n-h+1}^{n} l * R_{l-h}`
///
/// where `R_l` is the reward of the l-th pull of this arm.
#[derive(Debug, Clone, Default)]
pub struct WindowedArmStats {
    pub n: usize,
    pub rewards: Vec<f64>,
    pub pull_times: Vec<usize>,
    pub acc_a: f64,
    pub acc_b: f64,
    pub acc_c: f64,
    pub acc_d: f64,
    pub h: usize,
}

impl WindowedArmStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds stats from an explicit history with a fixed window size,
    /// recomputing the accumulators from the naive sums (test/diagnostic
    /// constructor; `push` is the production path).
    pub fn with_window(rewards: Vec<f64>, pull_times: Vec<usize>, h: usize) -> Self {
        assert_eq!(rewards.len(), pull_times.len());
        let mut s = Self {
            n: rewards.len(),
            rewards,
            pull_times,
            h,
            ..Self::default()
        };
        s.recompute_accumulators();
        s
    }

    fn r(&self, l: usize) -> f64 {
        self.rewards[l - 1]
    }

    fn recompute_accumulators(&mut self) {
        let (n, h) = (self.n, self.h);
        self.acc_a = 0.0;
        self.acc_b = 0.0;
        self.acc_c = 0.0;
        self.acc_d = 0.0;
        if h == 0 || 2 * h > n {
            return;
        }
        for l in (n - h + 1)..=n {
            self.acc_a += self.r(l);
            self.acc_b += self.r(l - h);
            self.acc_c += l as f64 * self.r(l);
            self.acc_d += l as f64 * self.r(l - h);
        }
    }

    /// Appends one observation and rolls the accumulators forward. The window
    /// schedule `h = floor(epsilon * n)` grows by at most one per pull, so the
    /// update is a case split on grown-vs-unchanged window.
    pub fn push(&mut self, reward: f64, t: usize, epsilon: f64) {
        self.rewards.push(reward);
        self.pull_times.push(t);
        self.n += 1;
        let n = self.n;
        let new_h = window_size(n, epsilon);
        match new_h - self.h {
            0 => {
                let h = self.h;
                if h > 0 {
                    self.acc_a += self.r(n) - self.r(n - h);
                    self.acc_b += self.r(n - h) - self.r(n - 2 * h);
                    self.acc_c += n as f64 * self.r(n) - (n - h) as f64 * self.r(n - h);
                    self.acc_d += n as f64 * self.r(n - h) - (n - h) as f64 * self.r(n - 2 * h);
                }
            }
            1 => {
                self.h = new_h;
                let h = new_h;
                self.acc_a += self.r(n);
                self.acc_b += self.r(n - 2 * h + 1);
                self.acc_c += n as f64 * self.r(n);
                // uses the already-updated acc_b
                self.acc_d += (n - h) as f64 * self.r(n - 2 * h + 1) + self.acc_b;
            }
            step => unreachable!("window grew by {step} in one pull"),
        }
    }
}

/// Windowed optimistic payoff estimate evaluated at round `t`, computed from
/// the accumulators: `(h*a + t*(a - b) - (c - d)) / h^2`. `+inf` when the
/// window is empty or covers more than half the history.
pub fn windowed_estimate(stats: &WindowedArmStats, t: usize) -> f64 {
    let h = stats.h;
    if h == 0 || h > stats.n / 2 {
        return f64::INFINITY;
    }
    let hf = h as f64;
    (hf * stats.acc_a + t as f64 * (stats.acc_a - stats.acc_b) - (stats.acc_c - stats.acc_d))
        / (hf * hf)
}

/// Naive O(h) evaluation of the same estimate, used as the oracle in tests.
pub fn windowed_estimate_naive(stats: &WindowedArmStats, t: usize) -> f64 {
    let (n, h) = (stats.n, stats.h);
    if h == 0 || h > n / 2 {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for l in (n - h + 1)..=n {
        let r_l = stats.rewards[l - 1];
        let r_lh = stats.rewards[l - h - 1];
        total += r_l + (t - l) as f64 * (r_l - r_lh) / h as f64;
    }
    total / h as f64
}

/// Heuristic restless estimate: increments are taken per elapsed calendar
/// time between pulls rather than per window slot. O(h); the pull-time
/// denominators admit no accumulator identity.
pub fn heuristic_estimate(stats: &WindowedArmStats, t: usize) -> f64 {
    let (n, h) = (stats.n, stats.h);
    if h == 0 || h > n / 2 {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for l in (n - h + 1)..=n {
        let r_l = stats.rewards[l - 1];
        let r_lh = stats.rewards[l - h - 1];
        let t_l = stats.pull_times[l - 1];
        let t_lh = stats.pull_times[l - h - 1];
        total += r_l + (t - t_l) as f64 * (r_l - r_lh) / (t_l - t_lh) as f64;
    }
    total / h as f64
}

/// High-probability exploration bonus
/// `sigma * (t - n + h - 1) * sqrt(10 * ln(1/delta) / h^3)`; `+inf` forces
/// exploration while the window is empty.
pub fn exploration_bonus(sigma: f64, t: usize, n: usize, h: usize, delta: f64) -> f64 {
    debug_assert!(delta > 0.0 && delta <= 1.0);
    if h == 0 {
        return f64::INFINITY;
    }
    let hf = h as f64;
    let span = t as f64 - n as f64 + hf - 1.0;
    sigma * span * (10.0 * (1.0 / delta).ln() / (hf * hf * hf)).sqrt()
}

/// Cached linear form of the heuristic estimate: `h * estimate = base + t * slope`.
#[derive(Debug, Clone, Copy, Default)]
struct HeurCache {
    base: f64,
    slope: f64,
}

/// The optimistic rising-bandit policy in all its variants, selected by
/// `RisingConfig { mode, deterministic }`.
pub struct RisingPolicy {
    config: RisingConfig,
    arms: Vec<WindowedArmStats>,
    heur: Vec<HeurCache>,
    /// Fixed seeded permutation used for tie-breaking in the argmax.
    order: Vec<usize>,
    label: String,
}

impl RisingPolicy {
    pub fn new(config: RisingConfig, k: usize, seed: u64) -> Self {
        assert!(k >= 1);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let label = match (config.mode, config.deterministic) {
            (RisingMode::Rested, false) => "r-ed-ucb",
            (RisingMode::Rested, true) => "r-ed-ucb-det",
            (RisingMode::Restless, false) => "r-less-ucb",
            (RisingMode::Restless, true) => "r-less-ucb-det",
            (RisingMode::RestlessHeuristic, _) => "r-less-ucb-h",
        }
        .to_string();
        Self {
            config,
            arms: (0..k).map(|_| WindowedArmStats::new()).collect(),
            heur: vec![HeurCache::default(); k],
            order,
            label,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn arm_stats(&self, arm: usize) -> &WindowedArmStats {
        &self.arms[arm]
    }

    fn heur_term(stats: &WindowedArmStats, l: usize) -> HeurCache {
        let h = stats.h;
        let r_l = stats.rewards[l - 1];
        let r_lh = stats.rewards[l - h - 1];
        let t_l = stats.pull_times[l - 1];
        let t_lh = stats.pull_times[l - h - 1];
        let slope = (r_l - r_lh) / (t_l - t_lh) as f64;
        HeurCache { base: r_l - t_l as f64 * slope, slope }
    }

    fn index(&self, arm: usize, t: usize, delta: f64) -> f64 {
        let stats = &self.arms[arm];
        let n = stats.n;
        match (self.config.mode, self.config.deterministic) {
            (RisingMode::Rested, true) => {
                if n < 2 {
                    return f64::INFINITY;
                }
                let mu = stats.rewards[n - 1];
                red_det_index(mu, mu - stats.rewards[n - 2], n, t)
            }
            (RisingMode::Restless, true) => {
                if n < 2 {
                    return f64::INFINITY;
                }
                rless_det_index(
                    stats.rewards[n - 1],
                    stats.rewards[n - 2],
                    stats.pull_times[n - 1],
                    stats.pull_times[n - 2],
                    t,
                )
            }
            (RisingMode::RestlessHeuristic, _) => {
                let h = stats.h;
                if h == 0 || h > n / 2 {
                    return f64::INFINITY;
                }
                let cache = &self.heur[arm];
                let estimate = (cache.base + t as f64 * cache.slope) / h as f64;
                estimate + exploration_bonus(self.config.sigma, t, n, h, delta)
            }
            (_, false) => {
                windowed_estimate(stats, t)
                    + exploration_bonus(self.config.sigma, t, stats.n, stats.h, delta)
            }
        }
    }
}

impl Policy for RisingPolicy {
    fn select_arm(&mut self, t: usize) -> usize {
        let delta = (t as f64).powf(-self.config.alpha).min(1.0);
        let mut best = self.order[0];
        let mut best_value = f64::NEG_INFINITY;
        for &arm in &self.order {
            let value = self.index(arm, t, delta);
            if value > best_value {
                best_value = value;
                best = arm;
            }
        }
        best
    }

    fn update(&mut self, arm: usize, reward: f64, t: usize) {
        let epsilon = self.config.epsilon;
        let stats = &mut self.arms[arm];
        let old_h = stats.h;
        stats.push(reward, t, epsilon);
        if self.config.mode != RisingMode::RestlessHeuristic {
            return;
        }
        let stats = &self.arms[arm];
        let (n, h) = (stats.n, stats.h);
        if h == 0 {
            return;
        }
        if h == old_h {
            // window slid by one: interior terms pair the same pulls as before
            let leave = Self::heur_term(stats, n - h);
            let enter = Self::heur_term(stats, n);
            let cache = &mut self.heur[arm];
            cache.base += enter.base - leave.base;
            cache.slope += enter.slope - leave.slope;
        } else {
            // window grew: every term re-pairs, rebuild from scratch
            let mut cache = HeurCache::default();
            for l in (n - h + 1)..=n {
                let term = Self::heur_term(stats, l);
                cache.base += term.base;
                cache.slope += term.slope;
            }
            self.heur[arm] = cache;
        }
    }

    fn name(&self) -> &str {
        &self.label
    }
}
