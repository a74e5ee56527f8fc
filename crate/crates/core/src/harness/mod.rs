//! Evaluation protocols, results tables and the subcommands built on them.

pub mod commands;
mod config;
mod experiment;
mod metrics;
pub mod reference;
mod table;

pub use config::{ConfigError, DataSource, ExperimentConfig, ExperimentMode};
pub use experiment::{
    adviser_scores, compare_classification_regression, load_dataset, load_pool, load_taxonomy,
    policy_table, run_full_experiment, run_small_protocol, stratified_split, synthetic_dataset,
    temperature_sweep, train_adviser, AdviserRow, Dataset, ExperimentError, FullRun,
    MIN_RECORDS_PER_CLASS,
};
pub use metrics::{
    evaluate_policy, median, metrics_from_outcomes, policy_outcomes, ClassMetrics, Outcome,
    PolicyMetrics, ACCURACY_THRESHOLD_DEG,
};
pub use table::{Cells, ExternalRow, ResultsTable, RowRole, TableRow};
