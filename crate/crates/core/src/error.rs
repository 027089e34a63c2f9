// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be positive definite (or PSD) is not.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// The covariance model produced a matrix too far from PSD to repair.
    #[error("model fidelity error: {0}")]
    ModelFidelity(String),

    #[error("degenerate hypotheses: {0}")]
    DegenerateHypotheses(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::DegenerateHypotheses(_) => 2,
            Error::NumericalDomain(_) | Error::ModelFidelity(_) | Error::Convergence(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
