//! Experiment harness: configuration, seeded tracking sweeps over the four
//! controllers, RMSE reporting and artifact export.

pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod output;
pub mod rmse;
pub mod validate;

pub use config::ExperimentConfig;
pub use diagnostics::{lyapunov_check, rho_validity, LyapunovCheck, RhoValidity};
pub use experiment::{run_experiment, run_single, train_gp, RunRecord, RunSummary};
pub use rmse::{compute_rmse, rmse_from_errors, Rmse};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] gprfl_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("misaligned data: {0}")]
    Alignment(String),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
