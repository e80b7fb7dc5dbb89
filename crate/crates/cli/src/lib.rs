//! Configuration-driven runner: star-schema ingestion, experiment modes and
//! report emission.

pub mod config;
pub mod ingest;
pub mod plot;
pub mod run;

pub use config::{ExperimentConfig, Mode, Overrides};
pub use ingest::load_star_schema;
pub use plot::emit_plot_data;
pub use run::{run_experiment, RunResult};
