//! Experiment harness for `snewton-core`: LIBSVM IO, run configurations,
//! CSV traces, `M` tuning and the theory verifier behind the `snewton` CLI.

pub mod config;
pub mod error;
pub mod libsvm;
pub mod problem;
pub mod runner;
pub mod trace;

pub use config::{load_runs, Method, RunConfig};
pub use error::HarnessError;
pub use snewton_core::verify;
pub use runner::{compare, run, run_on, tune_m, verify, CompareOutput, RunOutput, TuneOutput, VerifyReport};
