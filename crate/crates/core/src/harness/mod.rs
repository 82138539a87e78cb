//! End-to-end experiments: scoring, surrogate metrics, aggregation,
//! selection, baselines and reports.

mod config;
mod pairwise;
mod run;
mod synthetic;

pub use config::{
    AggMethod, ExperimentConfig, Granularity, SubsampleConfig, CONFIG_SCHEMA, DEFAULT_METRICS,
};
pub use pairwise::{pairwise_from_f1, pairwise_tests, PairwiseEntry, PairwiseTable};
pub use run::{
    aggregate_scope, dataset_metric_table, rollup_csv, run_experiment, run_with_dataset,
    RepetitionReport, ScopeReport, SelectionReport, StrategySummary,
};
pub use synthetic::{synthetic_benchmark, SyntheticConfig};
