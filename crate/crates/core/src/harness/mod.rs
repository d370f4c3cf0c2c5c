//! Experiment runner: configuration, seeded runs, evaluation, metrics files,
//! cross-seed aggregation and SVG output.

mod aggregate;
mod config;
mod eval;
mod plot;
mod run;

pub use aggregate::{aggregate, aggregate_rows, expand_inputs, write_rows, AggregateRow, CurvePoint};
pub use config::{AgentConfig, Budget, EnvConfig, ExperimentConfig, IntrinsicConfig, KeaConfig, Schedule};
pub use eval::{evaluate, make_env, mean_std, EvalResult, PolicySnapshot};
pub use plot::{curve_svg, grid_svg, heatmaps};
pub use run::{
    read_metrics, resolve_out_dir, run_experiment, Checkpoint, Counters, Manifest, MetricsRow, SeedRun,
    SeedSummary, StepReport, METRICS_HEADER,
};
