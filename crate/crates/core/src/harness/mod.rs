//! Experiment orchestration: configuration, team generation, demonstration
//! ingestion, run execution and metric logging.

pub mod config;
pub mod demos;
pub mod metrics;
pub mod run;
pub mod seeds;
pub mod summary;
pub mod teams;

pub use config::{EnvironmentConfig, ExperimentConfig, TeamSource};
pub use demos::{
    bootstrap_models, generate_demonstrations, ingest_demonstrations, parse_demonstrations,
    write_demonstrations, Demonstration, DemonstrationSet,
};
pub use metrics::{compute_bur, compute_cmr, normalize_series};
pub use run::{
    build_environment_and_teams, execute, run_csv, run_experiment, team_optima, write_outputs,
    ExperimentOutcome, IterationRecord, RunFailure, RunKey, RunLog, TeamContext,
};
pub use summary::{
    load_digests, summarize, summarize_dir, CurvePoint, RunDigest, StrategySummary, Summary,
    TeamSummary,
};
pub use teams::generate_random_team;
