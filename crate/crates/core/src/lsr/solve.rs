use std::time::Instant;

use rayon::prelude::*;

use super::{LsrError, LsrRow, Result, SubspaceBasis};
use crate::linalg::{cond, norm2, solve_triangular, DenseMatrix, HouseholderQr};
use crate::net::{ForwardPass, MlpArchitecture};
use crate::residual::{half_sq_norm, Linearization, ResidualProblem};

/// Outcome of one reduced solve. `q_lsr` and `f_lsr` are the linearized
/// prediction and residual at θ₀ + Δθ*, not a nonlinear re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LsrResult {
    pub rank: usize,
    pub delta_theta: Vec<f64>,
    pub y: Vec<f64>,
    pub q_lsr: Vec<f64>,
    pub f_lsr: Vec<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    /// Condition number of the reduced matrix `AJV`.
    pub kappa: f64,
    pub y_norm: f64,
    pub seconds: f64,
}

impl LsrResult {
    pub fn row(&self, test_error_before: Option<f64>, test_error_after: Option<f64>) -> LsrRow {
        LsrRow {
            rank: self.rank,
            loss_before: self.loss_before,
            loss_after: self.loss_after,
            test_error_before,
            test_error_after,
            kappa: self.kappa,
            y_norm: self.y_norm,
            seconds: self.seconds,
        }
    }
}

/// The n×r reduced matrix `AJV`, one residual action per column.
pub fn reduced_matrix(lin: &dyn Linearization, basis: &SubspaceBasis) -> Result<DenseMatrix> {
    let cols = (0..basis.rank())
        .into_par_iter()
        .map(|j| lin.aj_action(&basis.v.column(j)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let m = DenseMatrix::from_columns(&cols);
    if !m.is_finite() {
        return Err(LsrError::NonFinite("reduced matrix"));
    }
    Ok(m)
}

pub(crate) fn check_theta(problem: &dyn ResidualProblem, theta: &[f64], basis: Option<&SubspaceBasis>) -> Result<()> {
    let m = problem.param_dim();
    if theta.len() != m {
        return Err(LsrError::Shape {
            what: "parameter vector length",
            expected: m,
            got: theta.len(),
        });
    }
    if let Some(b) = basis {
        if b.param_dim() != m {
            return Err(LsrError::Shape {
                what: "basis row count",
                expected: m,
                got: b.param_dim(),
            });
        }
    }
    Ok(())
}

/// Householder factorization of the widest reduced matrix. Because the
/// reflectors are built column by column, the leading r×r block of R and
/// the leading r entries of `Qᵀb` are exactly those of the first r columns
/// alone, so every prefix rank is solved from one factorization.
pub(crate) struct ReducedFactor {
    r: DenseMatrix,
    qtb: Vec<f64>,
}

impl ReducedFactor {
    pub fn new(m: &DenseMatrix, f0: &[f64]) -> Result<Self> {
        let qr = HouseholderQr::new(m)?;
        let neg: Vec<f64> = f0.iter().map(|x| -x).collect();
        let qtb = qr.apply_qt(&neg)?;
        Ok(Self { r: qr.into_r(), qtb })
    }

    /// Solution and reduced condition number for the first `r` columns.
    pub fn solve_prefix(&self, r: usize) -> Result<(Vec<f64>, f64)> {
        let block = leading_block(&self.r, r);
        let y = solve_triangular(&block, &self.qtb[..r])?;
        let kappa = cond::ratio(&cond::triangular_singular_values(&block));
        Ok((y, kappa))
    }
}

fn leading_block(r: &DenseMatrix, k: usize) -> DenseMatrix {
    if k == r.rows() {
        return r.clone();
    }
    let mut out = DenseMatrix::zeros(k, k);
    for i in 0..k {
        out.row_mut(i).copy_from_slice(&r.row(i)[..k]);
    }
    out
}

/// Expands `y` into Δθ and evaluates the linearized model there.
pub(crate) fn finish(
    lin: &dyn Linearization,
    basis: &SubspaceBasis,
    y: Vec<f64>,
    kappa: f64,
    start: Instant,
) -> Result<LsrResult> {
    let delta_theta = basis.expand(&y);
    let f0 = lin.residual();
    let f_lsr: Vec<f64> = f0
        .iter()
        .zip(lin.aj_action(&delta_theta)?)
        .map(|(a, b)| a + b)
        .collect();
    let q_lsr: Vec<f64> = lin
        .outputs()
        .iter()
        .zip(lin.j_action(&delta_theta)?)
        .map(|(a, b)| a + b)
        .collect();
    let loss_after = half_sq_norm(&f_lsr);
    if !loss_after.is_finite() {
        return Err(LsrError::NonFinite("refined residual"));
    }
    Ok(LsrResult {
        rank: y.len(),
        y_norm: norm2(&y),
        delta_theta,
        y,
        q_lsr,
        f_lsr,
        loss_before: half_sq_norm(f0),
        loss_after,
        kappa,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Solves `min_y ‖f(θ₀) + AJV·y‖` by Householder QR and returns the
/// correction `Δθ* = V·y*` with its linearized prediction and residual.
pub fn one_shot_lsr(problem: &dyn ResidualProblem, theta: &[f64], basis: &SubspaceBasis) -> Result<LsrResult> {
    check_theta(problem, theta, Some(basis))?;
    let start = Instant::now();
    let lin = problem.linearize(theta)?;
    let f0 = lin.residual();
    if f0.iter().any(|x| !x.is_finite()) {
        return Err(LsrError::NonFinite("residual at θ₀"));
    }
    if basis.rank() > f0.len() {
        return Err(LsrError::Invalid(format!(
            "rank {} exceeds the {} residual rows",
            basis.rank(),
            f0.len()
        )));
    }
    let m = reduced_matrix(lin.as_ref(), basis)?;
    let factor = ReducedFactor::new(&m, f0)?;
    let (y, kappa) = factor.solve_prefix(basis.rank())?;
    finish(lin.as_ref(), basis, y, kappa, start)
}

/// Points per forward pass in [`lsr_predict_at`].
const PREDICT_CHUNK: usize = 4096;

/// Refined predictor `q(x; θ₀) + J(x)·Δθ` at arbitrary inputs, rows in the
/// order of `x`.
pub fn lsr_predict_at(
    arch: &MlpArchitecture,
    theta: &[f64],
    delta_theta: &[f64],
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    arch.check_params(theta)?;
    arch.check_params(delta_theta)?;
    let mut out = Vec::with_capacity(x.rows() * arch.output_dim);
    let mut start = 0;
    while start < x.rows() {
        let end = (start + PREDICT_CHUNK).min(x.rows());
        let chunk = x.row_range(start, end);
        let pass = ForwardPass::plain(arch, theta, &chunk)?;
        let q = pass.outputs();
        let dq = pass.tangent(delta_theta)?;
        out.extend(q.as_slice().iter().zip(dq.value()).map(|(a, b)| a + b));
        start = end;
    }
    Ok(DenseMatrix::from_vec(x.rows(), arch.output_dim, out)?)
}
