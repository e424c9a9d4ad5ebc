//! Experiment runner over `dgbo_core`: TOML configs in, CSV/JSON/verdict
//! files out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, GridSpec, Profile, Shape};
pub use error::{LabError, LabResult};
pub use experiments::run;
pub use output::{Report, Verdict};
