//! Experiment plans, grid execution and reports.

pub mod plan;
pub mod report;
pub mod runner;
pub mod synth;

pub use plan::{
    DatasetConfig, ExperimentPlan, Partition, PreprocessConfig, RunConfig, DEFAULT_RATIOS,
};
pub use report::{cells_csv, chart_svg, emit_report, ReportFormat, ALL_FORMATS};
pub use runner::{
    compare_sampling, prepare, prepare_all, run_cell, run_experiment, sweep_imbalance, Cell,
    CellOutcome, CellResult, CellStatus, Partitions, Run, RunRecord,
};
pub use synth::{gen_synthetic, SyntheticSpec};
