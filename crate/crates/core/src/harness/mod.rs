//! Configuration, refinement studies, reports and plots behind the CLI.

pub mod config;
pub mod plot;
pub mod report;
pub mod studies;

pub use config::{RunConfig, SeedSpec};
pub use report::{Check, MetricRow, StudyReport};
pub use studies::{run, Study};
