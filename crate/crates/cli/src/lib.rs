//! Configuration, ingestion, experiment orchestration and report output
//! for the `trendline` command.

pub mod config;
pub mod data;
pub mod experiment;
pub mod plot;
pub mod presets;
pub mod report;

pub use config::ExperimentConfig;
pub use data::load_csv;
pub use experiment::{run, run_on_series, ReportFile};
pub use plot::emit_plot_data;
