//! Experiment harness: solver comparisons on linearized problems, direction
//! scans, stationarity probes, the scalar counterexample, subspace modes, and
//! the synthetic datasets the experiments run on.

mod data;
mod linearized;
mod modes;
mod scalar;
mod scan;
mod solvers;

pub use data::{func2d_dataset, func2d_target, gaussian_blobs, split_rows};
pub use linearized::LinearizedProblem;
pub use modes::{subspace_modes, zero_crossings};
pub use scalar::{scalar_demo, ScalarProblem, ScalarReport, ScalarRow, SCALAR_TARGET};
pub use scan::{default_alphas, direction_scan, stationarity_probe, DirectionScan, ScanRow, StationarityReport};
pub use solvers::{compare_solvers, SolverBudgets, SolverComparison, SolverRow};

use thiserror::Error;

use crate::lsr::LsrError;
use crate::opt::OptError;
use crate::residual::ResidualError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error(transparent)]
    Lsr(#[from] LsrError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl From<crate::linalg::LinalgError> for LabError {
    fn from(e: crate::linalg::LinalgError) -> Self {
        LabError::Lsr(e.into())
    }
}

impl From<crate::net::NetError> for LabError {
    fn from(e: crate::net::NetError) -> Self {
        LabError::Residual(e.into())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
