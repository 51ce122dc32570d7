//! Library side of the command line front end: scenario files, experiment
//! orchestration and file emission. The binary is a thin argument parser on
//! top of these functions.

pub mod output;
pub mod pipeline;
pub mod scenario;

use thiserror::Error;

pub use scenario::{parse_scenario, ControllerSpec, Scenario, ToleranceSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 2 for usage and IO problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. }
            | CliError::Parse { .. }
            | CliError::Validation(_)
            | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
        }
    }
}

macro_rules! numerical_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Numerical(e.to_string())
            }
        })*
    };
}

numerical_from!(
    coevo::certify::CertifyError,
    coevo::coevolve::CoevolveError,
    coevo::game::GameError,
    coevo::gne::GneError,
    coevo::network::NetworkError,
    coevo::lmi::LmiError
);
