//! Experiment harness: configuration, the price-discovery × recovery
//! driver loop, per-iteration CSV logs and report rendering.

pub mod config;
pub mod record;
pub mod report;
pub mod runner;

pub use config::{
    ExperimentConfig, FeasibilityThreshold, InstanceSource, MethodConfig, OracleSettings,
    OutputConfig, RecoverySettings, TrackConfig,
};
pub use record::{
    read_csv_bytes, read_csv_file, write_csv_bytes, write_csv_file, IterationRecord,
    PointMetrics, CSV_SCHEMA, TRACKED_POINTS,
};
pub use report::{
    best_feasible_series, first_feasible, point_feasible, render_report, summary_text,
    ReportPaths,
};
pub use runner::{
    price_box_from_reference, primal_average, project_feasible, run_experiment,
    run_step_rule_sweep, RunOutput, StopReason, SweepOutput,
};
