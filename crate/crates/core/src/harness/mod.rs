//! Configuration-driven experiment runner and its file formats.

pub mod config;
pub mod experiment;
pub mod svg;
pub mod tables;

pub use config::{Algorithm, AlphaScale, DatasetConfig, ExperimentConfig, InitConfig, StepSizeConfig};
pub use experiment::{
    export_dataset, prepare_dataset, run_experiment, tune_step_size, ExperimentReport, PreparedData, Summary,
    TuningResult,
};
pub use svg::{emit_svg_chart, render_svg_chart, ChartLabels, Series};
pub use tables::{emit_bound_table, parse_trace_csv, trace_to_csv, Aggregate};
