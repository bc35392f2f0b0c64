//! Evaluation: metrics, experiment drivers (sparsity/weight sweeps,
//! ablations), and deterministic report emission.

pub mod experiments;
pub mod metrics;
pub mod report;

pub use experiments::{
    run_ablations, run_parameter_sweep, run_sparsity_sweep, AblationResult, AblationRow, SweepAxis,
    SweepPoint, SweepResult,
};
pub use metrics::{
    accuracy, compute_metrics, macro_f1, per_attribute_accuracy, predict_labels, LabelStats,
    MetricsReport,
};
pub use report::{emit_ablation_csv, emit_report, format_g10, ReportBundle};
