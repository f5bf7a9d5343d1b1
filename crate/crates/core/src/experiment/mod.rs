//! Run orchestration: configs, the training loop, evaluation, metrics,
//! checkpoints, and cross-seed aggregation.

mod aggregate;
mod clock;
mod config;
mod metrics;
mod presets;
mod run;


pub use aggregate::{
    aggregate, aggregate_records, counter_at, episodes_to_match, load_run, smooth, success_curve, MatchRow, RunRecord,
    Summary, VariantSummary, COUNTER_EPISODE, SMOOTHING_WINDOW,
};
pub use clock::process_cpu_seconds;
pub use config::{DbConfig, RunConfig};
pub use metrics::{metrics_to_csv, read_metrics, write_metrics, MetricsRow, METRICS_HEADER};
pub use presets::{manip_learner, preset, volley_learner, Scale, VARIANTS};
pub use run::{
    evaluate, load_checkpoint, load_db, run, version_string, RunManifest, RunOutcome, Seeds, Trainer, CONFIG_FILE,
    FINAL_CHECKPOINT, MANIFEST_FILE, METRICS_FILE,
};
