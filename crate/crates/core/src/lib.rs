//! Stochastic linear bandits whose users draw preference vectors from a
//! finite-support distribution, with a weighted UCB policy, baselines, a
//! regret simulator and evaluators for the associated bounds.

pub mod bounds;
pub mod cli;
pub mod env;
pub mod error;
pub mod policy;
pub mod sim;

pub use bounds::{BoundInputs, BoundReport};
pub use env::{ArmDistribution, InstanceSummary, PreferenceModel, ProblemInstance};
pub use error::{Error, Result};
pub use policy::{Policy, PolicyKind, WucbState};
pub use sim::{run_experiment, run_path, ExperimentResult, PathTrace};
