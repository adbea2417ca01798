//! Common policy interface plus the oracle reference policies.

use crate::payoff::PayoffCurve;

/// A bandit policy interacting with one environment replication. States are
/// exclusively owned; nothing is shared between replications.
pub trait Policy: Send {
    /// Chooses the arm to pull at round `t` (1-based).
    fn select_arm(&mut self, t: usize) -> usize;
    /// Feeds back the reward observed for `arm` at round `t`.
    fn update(&mut self, arm: usize, reward: f64, t: usize);
    fn name(&self) -> &str;
}

/// Clairvoyant restless reference: pulls the per-round argmax of the true
/// expected payoffs. Incurs zero regret on any restless instance.
pub struct OracleGreedy {
    curves: Vec<PayoffCurve>,
}

impl OracleGreedy {
    pub fn new(curves: Vec<PayoffCurve>) -> Self {
        Self { curves }
    }
}

impl Policy for OracleGreedy {
    fn select_arm(&mut self, t: usize) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (i, c) in self.curves.iter().enumerate() {
            let v = c.eval(t);
            if v > best_value {
                best_value = v;
                best = i;
            }
        }
        best
    }

    fn update(&mut self, _arm: usize, _reward: f64, _t: usize) {}

    fn name(&self) -> &str {
        "oracle-greedy"
    }
}
