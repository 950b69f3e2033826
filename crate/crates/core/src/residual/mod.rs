//! Residual least-squares problems `min ½‖f(θ)‖²`.
//!
//! A problem is evaluated by linearizing it at θ: the resulting
//! [`Linearization`] caches the forward pass and exposes the residual, the
//! network predictions, and the four Jacobian actions `Jv`, `Jᵀu`, `(AJ)v`
//! and `(AJ)ᵀw`, where `J = ∂q/∂θ` and `A = ∂f/∂q`. Neither factor is ever
//! formed explicitly.

mod burgers_ref;
mod classification;
mod collocation;
mod linear;
mod pde;
mod supervised;

pub use burgers_ref::{cole_hopf_solution, BurgersReference, CrankNicolson};
pub use classification::{accuracy, classification_residual, softmax, ClassificationProblem};
pub use collocation::{sample_collocation, CollocationSet, Domain, GroupWeights};
pub use linear::LinearResidual;
pub use pde::{
    burgers_residual, poisson_exact, poisson_residual, poisson_source, tsonn_wrap, PdeKind, PdeProblem, TsonnConfig,
    BURGERS_NU,
};
pub use supervised::{supervised_residual, SupervisedProblem};

use thiserror::Error;

use crate::linalg::{dot, LinalgError};
use crate::net::NetError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResidualError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("label {label} at sample {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("invalid problem configuration: {0}")]
    Invalid(String),
    #[error("non-finite residual")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ResidualError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(ResidualError::Shape { what, expected, got });
    }
    Ok(())
}

/// A residual problem evaluated at one fixed parameter vector.
pub trait Linearization: Sync {
    /// f(θ), length `residual_dim`.
    fn residual(&self) -> &[f64];
    /// Network predictions q(θ), length `output_dim`.
    fn outputs(&self) -> &[f64];
    /// `J·v`, length `output_dim`.
    fn j_action(&self, v: &[f64]) -> Result<Vec<f64>>;
    /// `Jᵀ·u`, length `param_dim`.
    fn jt_action(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// `(AJ)·v`, length `residual_dim`.
    fn aj_action(&self, v: &[f64]) -> Result<Vec<f64>>;
    /// `(AJ)ᵀ·w`, length `param_dim`.
    fn gt_action(&self, w: &[f64]) -> Result<Vec<f64>>;

    fn loss(&self) -> f64 {
        half_sq_norm(self.residual())
    }

    /// Gradient of ½‖f‖², i.e. `Gᵀf`.
    fn gradient(&self) -> Result<Vec<f64>> {
        self.gt_action(self.residual())
    }
}

pub trait ResidualProblem: Sync {
    fn param_dim(&self) -> usize;
    fn residual_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn linearize<'a>(&'a self, theta: &'a [f64]) -> Result<Box<dyn Linearization + 'a>>;

    fn residual_at(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.linearize(theta)?.residual().to_vec())
    }

    fn output_at(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.linearize(theta)?.outputs().to_vec())
    }

    fn j_action(&self, theta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.linearize(theta)?.j_action(v)
    }

    fn jt_action(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.linearize(theta)?.jt_action(u)
    }

    fn aj_action(&self, theta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.linearize(theta)?.aj_action(v)
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        let l = self.linearize(theta)?.loss();
        if l.is_finite() {
            Ok(l)
        } else {
            Err(ResidualError::NonFinite)
        }
    }

    fn loss_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let lin = self.linearize(theta)?;
        let l = lin.loss();
        if !l.is_finite() {
            return Err(ResidualError::NonFinite);
        }
        Ok((l, lin.gradient()?))
    }
}

/// Problems whose residual rows group into independent samples, so that a
/// sub-problem can be formed from any subset of samples.
pub trait SampleBatches: ResidualProblem + Sized {
    fn sample_count(&self) -> usize;
    fn subset(&self, indices: &[usize]) -> Result<Self>;
}

pub fn half_sq_norm(f: &[f64]) -> f64 {
    0.5 * dot(f, f)
}

/// ‖f‖² divided by the row count.
pub fn mse(f: &[f64]) -> f64 {
    if f.is_empty() {
        0.0
    } else {
        dot(f, f) / f.len() as f64
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::linalg::gaussian_sketch;

    pub fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        d / s.max(1e-300)
    }

    /// Central finite differences of the residual against `aj_action`, the
    /// adjoint identity for `gt_action`, and the loss gradient.
    pub fn check_problem<P: ResidualProblem>(p: &P, theta: &[f64], seed: u64) {
        let m = p.param_dim();
        let v = gaussian_sketch(m, 1, seed).into_vec();
        let h = 1e-5;
        let tp: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + h * d).collect();
        let tm: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - h * d).collect();
        let fp = p.residual_at(&tp).unwrap();
        let fm = p.residual_at(&tm).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let lin = p.linearize(theta).unwrap();
        let an = lin.aj_action(&v).unwrap();
        assert_eq!(an.len(), p.residual_dim());
        assert!(rel(&an, &fd) <= 1e-5, "aj vs fd: {}", rel(&an, &fd));

        let w = gaussian_sketch(p.residual_dim(), 1, seed + 1).into_vec();
        let lhs = dot(&w, &an);
        let rhs = dot(&lin.gt_action(&w).unwrap(), &v);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");

        let u = gaussian_sketch(p.output_dim(), 1, seed + 2).into_vec();
        let jv = lin.j_action(&v).unwrap();
        let lhs = dot(&u, &jv);
        let rhs = dot(&lin.jt_action(&u).unwrap(), &v);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");

        let g = lin.gradient().unwrap();
        let fd_loss = (p.loss(&tp).unwrap() - p.loss(&tm).unwrap()) / (2.0 * h);
        let an_loss = dot(&g, &v);
        assert!(
            (fd_loss - an_loss).abs() <= 1e-6 * an_loss.abs().max(1e-8),
            "{fd_loss} vs {an_loss}"
        );
    }
}
