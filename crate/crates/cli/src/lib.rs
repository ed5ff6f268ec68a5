//! Experiment harness around `snnconv-core`: checkpoints, IDX loading,
//! JSON configuration, the train/convert/simulate/analyze pipeline and its
//! reports.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod figures;
pub mod idx;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, run_sweep, ReportBundle};
