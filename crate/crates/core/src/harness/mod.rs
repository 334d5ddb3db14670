//! Experiment orchestration: config files, seeded runs, CSV output,
//! summaries, the self-check suite and the command line.

pub mod cli;
pub mod config;
pub mod matrix_file;
pub mod run;
pub mod summary;
pub mod verify;

pub use config::{load_config, parse_config, AlphaConfig, ExperimentConfig, StepCount};
pub use run::{run_experiment, RunOutput, SummaryRow};
pub use summary::{summarize, summarize_rows, SummaryReport};
