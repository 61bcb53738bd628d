//! Experiment grids, seeded execution and CSV output.

pub mod config;
pub mod output;
pub mod run;
pub mod stream;

pub use config::{expand_grid, Experiment, ExperimentConfig};
pub use output::{
    format_sig, round_sig, summarize, write_outputs, ConditionKey, ResultRecord, SummaryRow, RESULTS_FILE,
    RESULTS_HEADER, SUMMARY_FILE, SUMMARY_HEADER,
};
pub use run::{run_experiment, run_to_dir, score_models, ExperimentOutput, ModelData, ScoreContext};
pub use stream::{derive_stream, labels, Stream};
