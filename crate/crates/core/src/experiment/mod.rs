//! Experiment configuration, execution, campaign sweeps and reporting.

pub mod config;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{DatasetSpec, ExperimentConfig, OUTPUT_DIR_ENV};
pub use report::{report, ReportOutcome};
pub use runner::{
    default_jobs, evolve, execute, read_run, result_path, run_experiment, run_single, trace_path, write_run,
    ExecutionSummary, ExperimentOutcome, GenerationView, PreparedCell, RunResult,
};
pub use sweep::{sweep, CampaignManifest, LbssEntry, ManifestCell, SweepGrid, SweepOutcome};
