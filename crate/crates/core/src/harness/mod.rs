//! Config-driven experiment runner: presets, the training loop, metrics and
//! file export.

mod config;
mod metrics;
mod runner;

pub use config::{load_config, presets, ExperimentConfig, FreezeConfig};
pub use metrics::{
    emit_plot_data, export_csv, moving_average, EpisodeRecord, MetricsLog, StepRecord,
};
pub use runner::{
    evaluate_policy, prepare_initializer, run_experiment, EvalOutcome, Experiment, FreezeEvent,
    SeedPlan, StepOutcome,
};
