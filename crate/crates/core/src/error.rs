use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("branch {branch} has zero series impedance")]
    DegenerateBranch { branch: usize },

    #[error("network is disconnected: bus {bus} is unreachable from the slack bus")]
    Disconnected { bus: usize },

    #[error("power flow did not converge after {iterations} iterations (max mismatch {max_mismatch:.3e} pu)")]
    Divergence {
        iterations: usize,
        max_mismatch: f64,
    },

    #[error("cannot fold load at bus {bus}: voltage magnitude is zero")]
    SingularFold { bus: usize },

    #[error(
        "singular momentum at node {node}: zero momentum with torque imbalance {imbalance:.3e} pu"
    )]
    SingularMomentum { node: usize, imbalance: f64 },

    #[error("numerical blow-up: state became non-finite after t = {last_valid_time} s")]
    NumericalBlowup { last_valid_time: f64 },

    #[error("event protocol violation: {0}")]
    Protocol(String),

    #[error("momentum calibration failed: {0}")]
    Calibration(String),

    #[error("polarization undefined for zero apparent power")]
    UndefinedPolarization,

    #[error("damping ratio undefined for a zero mode")]
    UndefinedRatio,

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("unknown benchmark '{name}' (available: {available})")]
    UnknownBenchmark { name: String, available: String },

    #[error("case schema error{}: {message}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Schema {
        location: Option<String>,
        message: String,
    },

    #[error("case semantic error: {0}")]
    Semantic(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Divergence { .. }
            | Error::SingularMomentum { .. }
            | Error::NumericalBlowup { .. }
            | Error::Calibration(_)
            | Error::DegenerateSignal(_)
            | Error::Measurement(_) => ErrorClass::Numerical,
            Error::Io { .. } | Error::Locked(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
