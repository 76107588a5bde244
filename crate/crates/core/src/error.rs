use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle file is missing required column `{0}`")]
    MissingColumn(String),
    #[error("time grid is not uniform at row {row}: step {step} s, expected {expected} s")]
    NonUniformGrid {
        row: usize,
        step: f64,
        expected: f64,
    },
    #[error("negative velocity {value} m/s at row {row}")]
    NegativeVelocity { row: usize, value: f64 },
    #[error("drive cycle has no segments")]
    EmptyCycle,
    #[error("invalid drive cycle: {0}")]
    InvalidCycle(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operating point outside motor envelope: omega={omega} rad/s, torque={torque} Nm (limit {limit} Nm)")]
    OutsideEnvelope { omega: f64, torque: f64, limit: f64 },

    #[error("rank-deficient sample design: {0}")]
    RankDeficient(String),
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("fit failed at power level {level}: {source}")]
    LevelFit {
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("collinear battery samples")]
    CollinearSamples,
    #[error("battery power {p_b} W outside valid range [{lo}, {hi}] W")]
    BatteryRange { p_b: f64, lo: f64, hi: f64 },
    #[error("NRMSE undefined: reference sequence is constant")]
    ConstantReference,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("no feasible design: {constraint} violated")]
    EmptyFeasibleSet { constraint: String },
    #[error("no feasible start found after {draws} draws")]
    NoFeasibleStart { draws: usize },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("missing input {path}: {hint}")]
    MissingInput { path: PathBuf, hint: String },
    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error: 1 for infeasible designs and fit
    /// failures, 2 for usage, config and input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient(_)
            | Error::EigenFailure
            | Error::LevelFit { .. }
            | Error::CollinearSamples
            | Error::EmptyFeasibleSet { .. }
            | Error::NoFeasibleStart { .. } => 1,
            _ => 2,
        }
    }
}
