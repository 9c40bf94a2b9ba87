use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] fractal_sio::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INVALID
    }
}

/// Seed, thread count and summation order of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Determinism {
    pub seed: u64,
    pub threads: usize,
    /// `sequential-lexicographic` for one thread, `parallel-compensated`
    /// otherwise.
    pub summation: String,
}

impl Determinism {
    pub fn new(seed: u64, threads: usize) -> Self {
        let summation = if threads > 1 && cfg!(feature = "parallel") {
            "parallel-compensated"
        } else {
            "sequential-lexicographic"
        };
        Determinism {
            seed,
            threads,
            summation: summation.into(),
        }
    }
}

/// Machine-readable result of one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub inputs: Value,
    pub outputs: Value,
    pub determinism: Determinism,
    pub exit_code: i32,
}

impl RunReport {
    pub fn new(command: &str, inputs: Value, outputs: Value, determinism: Determinism, exit_code: i32) -> Self {
        RunReport {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs,
            outputs,
            determinism,
            exit_code,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
