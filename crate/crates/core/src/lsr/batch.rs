use std::time::Instant;

use super::basis::{basis_from_projection, projected_jacobian, sketch_dim};
use super::solve::{check_theta, reduced_matrix};
use super::{LsrError, LsrResult, Result, SubspaceBasis, SubspaceOptions};
use crate::linalg::{cond, norm2, solve_triangular, DenseMatrix, HouseholderQr};
use crate::residual::{half_sq_norm, SampleBatches};

/// Running triangular factor of the stacked reduced system. After any
/// sequence of updates, `R·y = z` has the same least-squares solution as
/// the tall system of all rows seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    r_factor: DenseMatrix,
    z: Vec<f64>,
    rows_seen: usize,
}

impl ReducedSystem {
    pub fn new(rank: usize) -> Self {
        Self {
            r_factor: DenseMatrix::zeros(rank, rank),
            z: vec![0.0; rank],
            rows_seen: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.z.len()
    }

    pub fn r_factor(&self) -> &DenseMatrix {
        &self.r_factor
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Absorbs the rows `y·x ≈ b` by a QR of `[R; y]` and `[z; b]`.
    pub fn update(&mut self, y: &DenseMatrix, b: &[f64]) -> Result<()> {
        let r = self.rank();
        if y.cols() != r {
            return Err(LsrError::Shape {
                what: "batch reduced-matrix width",
                expected: r,
                got: y.cols(),
            });
        }
        if b.len() != y.rows() {
            return Err(LsrError::Shape {
                what: "batch right-hand side length",
                expected: y.rows(),
                got: b.len(),
            });
        }
        if y.rows() == 0 {
            return Ok(());
        }
        let stacked = self.r_factor.vstack(y)?;
        let mut rhs = self.z.clone();
        rhs.extend_from_slice(b);
        let qr = HouseholderQr::new(&stacked)?;
        let qtb = qr.apply_qt(&rhs)?;
        self.z.copy_from_slice(&qtb[..r]);
        self.r_factor = qr.into_r();
        self.rows_seen += y.rows();
        Ok(())
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        Ok(solve_triangular(&self.r_factor, &self.z)?)
    }

    /// Condition number of the stacked reduced matrix.
    pub fn kappa(&self) -> f64 {
        cond::ratio(&cond::triangular_singular_values(&self.r_factor))
    }
}

fn batches(n: usize, size: usize) -> Result<Vec<Vec<usize>>> {
    if size == 0 {
        return Err(LsrError::Invalid("batch size must be at least 1".into()));
    }
    if n == 0 {
        return Err(LsrError::Invalid("problem has no samples".into()));
    }
    Ok((0..n).collect::<Vec<_>>().chunks(size).map(<[usize]>::to_vec).collect())
}

/// Subspace from the accumulated projections `H = Σ_b Q_bᵀJ_b`, one sketch
/// QR per batch. Batches with fewer sketch rows than `r + p` are skipped.
pub fn batch_subspace<P: SampleBatches>(
    problem: &P,
    theta: &[f64],
    opts: &SubspaceOptions,
    batch_size: usize,
) -> Result<SubspaceBasis> {
    check_theta(problem, theta, None)?;
    let m = problem.param_dim();
    opts.validate(m)?;
    let omega = opts.omega(m);
    let k = omega.cols();
    let mut h: Option<DenseMatrix> = None;
    let mut largest = 0;
    for idx in batches(problem.sample_count(), batch_size)? {
        let sub = problem.subset(&idx)?;
        let rows = sketch_dim(&sub, opts.source);
        largest = largest.max(rows);
        if rows < k {
            continue;
        }
        let lin = sub.linearize(theta)?;
        let b = projected_jacobian(lin.as_ref(), opts, &omega)?;
        match &mut h {
            None => h = Some(b),
            Some(acc) => {
                for (x, y) in acc.as_mut_slice().iter_mut().zip(b.as_slice()) {
                    *x += y;
                }
            }
        }
    }
    let h = h.ok_or(LsrError::InsufficientBatch { needed: k, largest })?;
    basis_from_projection(&h, opts)
}

/// Streams the reduced system batch by batch for a fixed basis. The
/// factorization never holds more than one batch of reduced rows.
pub fn batch_lsr_with_basis<P: SampleBatches>(
    problem: &P,
    theta: &[f64],
    basis: &SubspaceBasis,
    batch_size: usize,
) -> Result<LsrResult> {
    check_theta(problem, theta, Some(basis))?;
    let start = Instant::now();
    let groups = batches(problem.sample_count(), batch_size)?;
    let mut sys = ReducedSystem::new(basis.rank());
    for idx in &groups {
        let sub = problem.subset(idx)?;
        let lin = sub.linearize(theta)?;
        let f = lin.residual();
        if f.iter().any(|x| !x.is_finite()) {
            return Err(LsrError::NonFinite("batch residual"));
        }
        let y = reduced_matrix(lin.as_ref(), basis)?;
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        sys.update(&y, &neg)?;
    }
    if sys.rows_seen() < basis.rank() {
        return Err(LsrError::Invalid(format!(
            "rank {} exceeds the {} residual rows",
            basis.rank(),
            sys.rows_seen()
        )));
    }
    let y = sys.solve()?;
    let kappa = sys.kappa();
    let delta_theta = basis.expand(&y);

    // Second sweep evaluates the linearized model at Δθ*, batch by batch.
    let (mut f0, mut f_lsr, mut q_lsr) = (Vec::new(), Vec::new(), Vec::new());
    for idx in &groups {
        let sub = problem.subset(idx)?;
        let lin = sub.linearize(theta)?;
        f0.extend_from_slice(lin.residual());
        f_lsr.extend(
            lin.residual()
                .iter()
                .zip(lin.aj_action(&delta_theta)?)
                .map(|(a, b)| a + b),
        );
        q_lsr.extend(
            lin.outputs()
                .iter()
                .zip(lin.j_action(&delta_theta)?)
                .map(|(a, b)| a + b),
        );
    }
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
        loss_before: half_sq_norm(&f0),
        loss_after,
        kappa,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Batch LSR: batched subspace construction followed by the streamed
/// reduced solve.
pub fn batch_lsr<P: SampleBatches>(
    problem: &P,
    theta: &[f64],
    opts: &SubspaceOptions,
    batch_size: usize,
) -> Result<LsrResult> {
    let basis = batch_subspace(problem, theta, opts, batch_size)?;
    batch_lsr_with_basis(problem, theta, &basis, batch_size)
}
