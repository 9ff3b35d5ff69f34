//! Experiment harness for the `condcorrupt` laboratory: JSON configuration,
//! parameter sweeps, sample dumps and the `verify` check suite, all writing
//! deterministic CSV.

pub mod config;
pub mod error;
pub mod results;
pub mod sample;
pub mod sweep;
pub mod verify;

pub use config::{Cell, ExperimentConfig};
pub use error::{LabError, LabResult};
pub use results::{read_rows, write_rows, CheckOutcome, ResultRow};
pub use sample::cmd_sample;
pub use sweep::{cmd_sweep, sweep_rows, Target};
pub use verify::cmd_verify;
