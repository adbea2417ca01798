pub mod baselines;
pub mod env;
pub mod harness;
pub mod modelsel;
pub mod payoff;
pub mod policy;
pub mod rising;
