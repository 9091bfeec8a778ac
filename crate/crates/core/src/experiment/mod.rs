//! Configuration, replication harness and reports.

pub mod config;
pub mod harness;
pub mod report;

pub use config::{ExperimentConfig, Estimator};
pub use harness::{replication_seed, run_convergence_study, run_experiment};
pub use report::{ConvergenceReport, ExperimentReport, ReplicationOutcome, ReplicationResult, RunInfo, Summary};
