//! Synthetic workloads, timing runs, curve and timing tables, and the
//! gradient-check suite.

mod gradcheck_suite;
mod runner;
mod synthetic;
mod tables;

pub use gradcheck_suite::{
    run_gradcheck_suite, tiny_architectures, GradCheckCase, GradCheckSuiteOptions,
    GradCheckSuiteReport,
};
pub use runner::{run_benchmark, speed_ranking, BenchmarkConfig, DeskScale, ModelRun};
pub use synthetic::{synthetic_corpus, SyntheticSpec};
pub use tables::{
    epoch_times_csv, mean_epoch_ms, metrics_csv, parse_epoch_times, Curve, CurveTable, TimingTable,
    EPOCHS_COLUMN, EPOCH_TIMES_HEADER, METRICS_HEADER, TIMED_EPOCHS, TIMING_HEADER,
};
