//! Iterative optimizers and Krylov least-squares solvers.
//!
//! The optimizers see a problem only through an [`Objective`] oracle on a
//! flat vector, so the same code trains networks, solves reduced
//! linearized problems, and runs the I-LSR alignment stage.

mod adam;
mod krylov;
mod lbfgs;

pub use adam::{adam_minimize, AdamConfig, Batching};
pub use krylov::{cgls_solve, lsqr_solve, KrylovResult, LinearOperator};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig};

use std::fmt::Write as _;

use thiserror::Error;

use crate::residual::{ResidualError, ResidualProblem, SampleBatches};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error("breakdown at iteration {iteration}: {reason}")]
    Breakdown { iteration: usize, reason: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("objective evaluation failed: {0}")]
    Oracle(#[from] ResidualError),
}

pub type Result<T> = std::result::Result<T, OptError>;

/// Loss-and-gradient oracle over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn loss(&self, x: &[f64]) -> Result<f64> {
        Ok(self.loss_and_gradient(x)?.0)
    }

    /// Number of independently sampleable terms; zero for full-batch-only
    /// objectives.
    fn sample_count(&self) -> usize {
        0
    }

    /// Loss and gradient restricted to the given samples.
    fn batch_loss_and_gradient(&self, x: &[f64], _indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.loss_and_gradient(x)
    }
}

/// `½‖f(θ)‖²` of a residual problem, full batch.
pub struct ResidualObjective<'a, P: ResidualProblem + ?Sized>(pub &'a P);

impl<P: ResidualProblem + ?Sized> Objective for ResidualObjective<'_, P> {
    fn dim(&self) -> usize {
        self.0.param_dim()
    }

    fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(self.0.loss_and_gradient(x)?)
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.loss(x)?)
    }
}

/// `½‖f(θ)‖²` of a sample-structured residual problem; mini-batches use the
/// sub-problem on the selected samples.
pub struct SampledObjective<'a, P: SampleBatches>(pub &'a P);

impl<P: SampleBatches> Objective for SampledObjective<'_, P> {
    fn dim(&self) -> usize {
        self.0.param_dim()
    }

    fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(self.0.loss_and_gradient(x)?)
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.loss(x)?)
    }

    fn sample_count(&self) -> usize {
        self.0.sample_count()
    }

    fn batch_loss_and_gradient(&self, x: &[f64], indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        Ok(self.0.subset(indices)?.loss_and_gradient(x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub seconds: f64,
}

/// Per-evaluation optimizer history; steps strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptTrace {
    pub records: Vec<TraceRecord>,
}

impl OptTrace {
    pub fn push(&mut self, rec: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.step < rec.step));
        self.records.push(rec);
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.records.iter().map(|r| r.loss).reduce(f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss,grad_norm,lr,seconds\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.step,
                fmt_f64(r.loss),
                fmt_f64(r.grad_norm),
                fmt_f64(r.lr),
                fmt_f64(r.seconds)
            );
        }
        s
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    crate::linalg::norm2(x)
}
