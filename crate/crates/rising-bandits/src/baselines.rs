//! The six non-stationary / stationary comparison policies with their
//! recommended parameterizations. All logarithms are natural. These policies
//! assume rewards in [0, 1], so Gaussian rewards are clipped on the way in;
//! the rising policies never clip.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAlgo {
    Rexp3,
    KlUcb,
    Ser4,
    SwUcb,
    SwKlUcb,
    SwTs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum BaselineParams {
    Rexp3 { v_t: f64, gamma: f64, delta_t: usize },
    KlUcb { c: f64 },
    Ser4 { delta: f64, epsilon: f64, phi: f64 },
    SwUcb { tau: usize, xi: f64 },
    SwKlUcb { tau: usize },
    SwTs { beta: f64, tau: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("sw-kl-ucb window tau = sigma^(-4/5) is undefined for sigma = 0")]
    SwKlUcbNeedsNoise,
    #[error("parameter {name} = {value} outside valid range")]
    ParamOutOfRange { name: &'static str, value: f64 },
}

/// Recommended parameters for each baseline given the experiment shape.
pub fn default_params(
    algo: BaselineAlgo,
    k: usize,
    t: usize,
    sigma: f64,
) -> Result<BaselineParams, BaselineError> {
    assert!(k >= 2 && t >= 2);
    let kf = k as f64;
    let tf = t as f64;
    Ok(match algo {
        BaselineAlgo::Rexp3 => {
            // the variation budget equals K: each payoff climbs from 0 to at most 1
            let v_t = kf;
            let delta_t = ((kf * kf.ln()).powf(1.0 / 3.0) * (tf / v_t).powf(2.0 / 3.0)).ceil() as usize;
            let gamma = (kf * kf.ln() / ((std::f64::consts::E - 1.0) * delta_t as f64))
                .sqrt()
                .min(1.0);
            BaselineParams::Rexp3 { v_t, gamma, delta_t }
        }
        BaselineAlgo::KlUcb => BaselineParams::KlUcb { c: 3.0 },
        BaselineAlgo::Ser4 => BaselineParams::Ser4 {
            delta: 1.0 / tf,
            epsilon: 1.0 / (kf * tf),
            phi: (kf / (tf * kf * (kf * tf).ln())).sqrt(),
        },
        BaselineAlgo::SwUcb => BaselineParams::SwUcb {
            tau: (4.0 * (tf * tf.ln()).sqrt()).ceil() as usize,
            xi: 0.6,
        },
        BaselineAlgo::SwKlUcb => {
            if sigma <= 0.0 {
                return Err(BaselineError::SwKlUcbNeedsNoise);
            }
            BaselineParams::SwKlUcb { tau: (sigma.powf(-0.8)).round().max(1.0) as usize }
        }
        BaselineAlgo::SwTs => BaselineParams::SwTs {
            beta: 0.5,
            tau: tf.sqrt().round().max(1.0) as usize,
        },
    })
}

fn clip01(r: f64) -> f64 {
    r.clamp(0.0, 1.0)
}

/// Bernoulli KL divergence with the closed-form boundary cases.
fn bernoulli_kl(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        -(1.0 - q).ln()
    } else if p >= 1.0 {
        -q.ln()
    } else {
        p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
    }
}

fn klucb_with_budget(mean: f64, n: usize, budget: f64) -> f64 {
    let mean = clip01(mean);
    let budget = budget.max(0.0);
    if mean >= 1.0 {
        return 1.0;
    }
    if budget == 0.0 {
        return mean;
    }
    let nf = n as f64;
    let mut lo = mean;
    let mut hi = 1.0;
    // kl(mean, .) is increasing on [mean, 1) and blows up at 1, so the
    // boundary nf * kl = budget is bracketed by (lo, hi); the tight interval
    // tolerance keeps the budget residual small even where kl is steep
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if nf * bernoulli_kl(mean, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    lo
}

/// KL-UCB index: the largest q with `n * kl(mean, q) <= ln t + c ln ln t`,
/// budget clamped at zero, solved by bisection.
pub fn klucb_index(mean: f64, n: usize, t: usize, c: f64) -> f64 {
    debug_assert!(n >= 1);
    let lt = (t as f64).ln();
    let budget = lt + c * lt.ln();
    klucb_with_budget(mean, n, budget)
}

/// Sliding-window UCB index; `+inf` while the window holds nothing for the arm.
pub fn swucb_index(window_sum: f64, window_count: usize, t: usize, tau: usize, xi: f64) -> f64 {
    if window_count == 0 {
        return f64::INFINITY;
    }
    let eff = t.min(tau) as f64;
    window_sum / window_count as f64 + (xi * eff.ln() / window_count as f64).sqrt()
}

/// Sliding-window KL-UCB index with exploration budget computed from the
/// effective horizon `min(t, tau)`.
pub fn swklucb_index(window_mean: f64, window_count: usize, t: usize, tau: usize, c: f64) -> f64 {
    if window_count == 0 {
        return f64::INFINITY;
    }
    let eff = (t.min(tau)) as f64;
    let lt = eff.ln();
    klucb_with_budget(window_mean, window_count, lt + c * lt.ln())
}

// ---------------------------------------------------------------------------
// Rexp3
// ---------------------------------------------------------------------------

pub struct Rexp3 {
    gamma: f64,
    delta_t: usize,
    weights: Vec<f64>,
    last_probs: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Rexp3 {
    pub fn new(params: &BaselineParams, k: usize, seed: u64) -> Self {
        let (gamma, delta_t) = match params {
            BaselineParams::Rexp3 { gamma, delta_t, .. } => (*gamma, *delta_t),
            other => panic!("wrong params for rexp3: {other:?}"),
        };
        Self {
            gamma,
            delta_t,
            weights: vec![1.0; k],
            last_probs: vec![1.0 / k as f64; k],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn probs(&self) -> Vec<f64> {
        let k = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .map(|w| (1.0 - self.gamma) * w / total + self.gamma / k)
            .collect()
    }
}

impl Policy for Rexp3 {
    fn select_arm(&mut self, t: usize) -> usize {
        if (t - 1) % self.delta_t == 0 {
            self.weights.iter_mut().for_each(|w| *w = 1.0);
        }
        self.last_probs = self.probs();
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.last_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.last_probs.len() - 1
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        let k = self.weights.len() as f64;
        let p = self.last_probs[arm];
        self.weights[arm] *= (self.gamma * (clip01(reward) / p) / k).exp();
        // probabilities are scale-invariant; renormalize before overflow
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        if max > 1e100 {
            self.weights.iter_mut().for_each(|w| *w /= max);
        }
    }

    fn name(&self) -> &str {
        "rexp3"
    }
}

// ---------------------------------------------------------------------------
// KL-UCB
// ---------------------------------------------------------------------------

pub struct KlUcb {
    c: f64,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl KlUcb {
    pub fn new(params: &BaselineParams, k: usize) -> Self {
        let c = match params {
            BaselineParams::KlUcb { c } => *c,
            other => panic!("wrong params for kl-ucb: {other:?}"),
        };
        Self { c, sums: vec![0.0; k], counts: vec![0; k] }
    }
}

impl Policy for KlUcb {
    fn select_arm(&mut self, t: usize) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for i in 0..self.counts.len() {
            let value = if self.counts[i] == 0 {
                f64::INFINITY
            } else {
                klucb_index(self.sums[i] / self.counts[i] as f64, self.counts[i], t, self.c)
            };
            if value > best_value {
                best_value = value;
                best = i;
            }
        }
        best
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        self.sums[arm] += clip01(reward);
        self.counts[arm] += 1;
    }

    fn name(&self) -> &str {
        "kl-ucb"
    }
}

// ---------------------------------------------------------------------------
// Ser4
// ---------------------------------------------------------------------------

pub struct Ser4 {
    delta: f64,
    epsilon: f64,
    phi: f64,
    horizon: usize,
    active: Vec<bool>,
    sums: Vec<f64>,
    counts: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Ser4 {
    pub fn new(params: &BaselineParams, k: usize, horizon: usize, seed: u64) -> Self {
        let (delta, epsilon, phi) = match params {
            BaselineParams::Ser4 { delta, epsilon, phi } => (*delta, *epsilon, *phi),
            other => panic!("wrong params for ser4: {other:?}"),
        };
        Self {
            delta,
            epsilon,
            phi,
            horizon,
            active: vec![true; k],
            sums: vec![0.0; k],
            counts: vec![0; k],
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn reset_phase(&mut self) {
        self.active.iter_mut().for_each(|a| *a = true);
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.cursor = 0;
    }

    fn radius(&self, m: usize) -> f64 {
        let k = self.active.len() as f64;
        let t = self.horizon as f64;
        2.0 * ((4.0 * k * t * t / self.delta).ln() / (2.0 * m as f64)).sqrt()
    }

    fn eliminate(&mut self) {
        // comparisons are meaningful only once every active arm has data
        if (0..self.active.len()).any(|i| self.active[i] && self.counts[i] == 0) {
            return;
        }
        let best = self
            .active
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| self.sums[i] / self.counts[i] as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut best_kept = false;
        for i in 0..self.active.len() {
            if !self.active[i] {
                continue;
            }
            let mean = self.sums[i] / self.counts[i] as f64;
            if !best_kept && mean == best {
                best_kept = true; // the empirical best is never eliminated
                continue;
            }
            if best - mean >= self.radius(self.counts[i]) {
                self.active[i] = false;
            }
        }
    }
}

impl Policy for Ser4 {
    fn select_arm(&mut self, _t: usize) -> usize {
        if self.rng.gen::<f64>() < self.phi {
            self.reset_phase();
        }
        if self.rng.gen::<f64>() < self.epsilon {
            return self.rng.gen_range(0..self.active.len());
        }
        // round-robin over the active set
        let k = self.active.len();
        for step in 0..k {
            let i = (self.cursor + step) % k;
            if self.active[i] {
                self.cursor = (i + 1) % k;
                return i;
            }
        }
        unreachable!("active set never empties");
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        self.sums[arm] += clip01(reward);
        self.counts[arm] += 1;
        self.eliminate();
    }

    fn name(&self) -> &str {
        "ser4"
    }
}

// ---------------------------------------------------------------------------
// Sliding-window policies share the same eviction bookkeeping
// ---------------------------------------------------------------------------

struct Window {
    tau: usize,
    entries: VecDeque<(usize, f64)>,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl Window {
    fn new(tau: usize, k: usize) -> Self {
        assert!(tau >= 1);
        Self { tau, entries: VecDeque::new(), sums: vec![0.0; k], counts: vec![0; k] }
    }

    fn push(&mut self, arm: usize, reward: f64) {
        self.entries.push_back((arm, reward));
        self.sums[arm] += reward;
        self.counts[arm] += 1;
        if self.entries.len() > self.tau {
            let (old_arm, old_reward) = self.entries.pop_front().expect("non-empty");
            self.sums[old_arm] -= old_reward;
            self.counts[old_arm] -= 1;
        }
    }
}

pub struct SwUcb {
    xi: f64,
    window: Window,
}

impl SwUcb {
    pub fn new(params: &BaselineParams, k: usize) -> Self {
        let (tau, xi) = match params {
            BaselineParams::SwUcb { tau, xi } => (*tau, *xi),
            other => panic!("wrong params for sw-ucb: {other:?}"),
        };
        Self { xi, window: Window::new(tau, k) }
    }
}

impl Policy for SwUcb {
    fn select_arm(&mut self, t: usize) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for i in 0..self.window.counts.len() {
            let value = swucb_index(
                self.window.sums[i],
                self.window.counts[i],
                t,
                self.window.tau,
                self.xi,
            );
            if value > best_value {
                best_value = value;
                best = i;
            }
        }
        best
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        self.window.push(arm, clip01(reward));
    }

    fn name(&self) -> &str {
        "sw-ucb"
    }
}

pub struct SwKlUcb {
    c: f64,
    window: Window,
}

impl SwKlUcb {
    pub fn new(params: &BaselineParams, k: usize) -> Self {
        let tau = match params {
            BaselineParams::SwKlUcb { tau } => *tau,
            other => panic!("wrong params for sw-kl-ucb: {other:?}"),
        };
        Self { c: 3.0, window: Window::new(tau, k) }
    }
}

impl Policy for SwKlUcb {
    fn select_arm(&mut self, t: usize) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for i in 0..self.window.counts.len() {
            let count = self.window.counts[i];
            let value = if count == 0 {
                f64::INFINITY
            } else {
                swklucb_index(
                    self.window.sums[i] / count as f64,
                    count,
                    t,
                    self.window.tau,
                    self.c,
                )
            };
            if value > best_value {
                best_value = value;
                best = i;
            }
        }
        best
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        self.window.push(arm, clip01(reward));
    }

    fn name(&self) -> &str {
        "sw-kl-ucb"
    }
}

pub struct SwTs {
    window: Window,
    rng: ChaCha8Rng,
}

impl SwTs {
    pub fn new(params: &BaselineParams, k: usize, seed: u64) -> Self {
        let tau = match params {
            BaselineParams::SwTs { tau, .. } => *tau,
            other => panic!("wrong params for sw-ts: {other:?}"),
        };
        Self { window: Window::new(tau, k), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Windowed Beta(1 + S, 1 + F) parameters for one arm; rewards feed the
    /// posterior fractionally after clipping.
    fn posterior(&self, arm: usize) -> (f64, f64) {
        let s = self.window.sums[arm];
        let f = self.window.counts[arm] as f64 - s;
        (1.0 + s, 1.0 + f)
    }
}

impl Policy for SwTs {
    fn select_arm(&mut self, _t: usize) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for i in 0..self.window.counts.len() {
            let (a, b) = self.posterior(i);
            let sample = Beta::new(a, b).expect("valid posterior").sample(&mut self.rng);
            if sample > best_value {
                best_value = sample;
                best = i;
            }
        }
        best
    }

    fn update(&mut self, arm: usize, reward: f64, _t: usize) {
        self.window.push(arm, clip01(reward));
    }

    fn name(&self) -> &str {
        "sw-ts"
    }
}
