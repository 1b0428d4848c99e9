//! Benchmark orchestration: subsampled scoring of a checkpoint manifest,
//! hyperparameter selection, Kendall-τ evaluation and synthetic zoos.

pub mod config;
pub mod evaluate;
pub mod report;
pub mod run;
pub mod select;
pub mod synth;

pub use config::{GaussHparams, MetricConfig, MetricName, RunConfig};
pub use evaluate::{evaluate_ranking, robust_std, std_ratio_rows, write_std_ratio_csv, EvaluationTable, StdRatioRow};
pub use report::{Cell, CellStatus, GaussGridEntry, LinearGridEntry, MetricRow, MetricSummary, RankingReport, Selection, SplitReport};
pub use run::{run_metrics, WORKERS_ENV};
pub use select::{select_hparams_via_linear_valid, HparamChoice};
pub use synth::{generate_synthetic_benchmark, SyntheticBenchmark, SyntheticSpec};
