//! Run orchestration shared by the command-line tool and the Python module:
//! configuration, training runs, benchmarks and snapshot export.

mod benchmark;
mod config;
mod eval;
mod records;
mod snapshot;
mod train;

pub use benchmark::{run_benchmark, BenchmarkRow};
pub use config::{DensityMode, Derived, EnvKind, GroupPlan, RunConfig};
pub use eval::{tag_touch_rate, ChaserPolicy};
pub use records::{read_csv, read_view_csv, write_csv, write_view_csv, MetricsRow, OpinionRow, TimingRow, ViewRow};
pub use snapshot::{run_snapshot, SnapshotSummary};
pub use train::{run_train, TrainSummary};

use std::path::PathBuf;

use thiserror::Error;

use crate::env::EnvError;
use crate::ppo::PpoError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "FLOCKRL_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or input; maps to exit code 2.
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid { .. } => 2,
            _ => 1,
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Config { field, message } => Self::invalid(field, message),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<PpoError> for HarnessError {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::Config { field, message } => Self::invalid(field, message),
            PpoError::Env(env) => env.into(),
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

/// Runs `f` inside a thread pool of `workers` threads (0: one per core).
pub fn with_workers<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T, HarnessError> + Send,
) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    pool.install(f)
}
