//! Instance generators, feasible starts and the batch runner behind the `rsqo`
//! command-line tool.

pub mod completion;
pub mod cut;
mod error;
pub mod instance;
pub mod runner;
pub mod trace;

pub use completion::CompletionInstance;
pub use cut::CutInstance;
pub use error::{BenchError, Result};
pub use instance::{Instance, ProblemParams};
pub use runner::{run, run_trial, RunSpec, Summary, TrialOptions, TrialResult};
