use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{LsrError, Result};
use crate::linalg::{gaussian_sketch, thin_svd_qr, DenseMatrix, HouseholderQr};
use crate::residual::{Linearization, ResidualProblem};

/// Which Jacobian the subspace is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubspaceSource {
    /// The output Jacobian `J = ∂q/∂θ`.
    #[default]
    Output,
    /// The residual Jacobian `G = AJ`.
    Residual,
}

impl SubspaceSource {
    pub fn name(self) -> &'static str {
        match self {
            SubspaceSource::Output => "output",
            SubspaceSource::Residual => "residual",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "output" => Some(SubspaceSource::Output),
            "residual" => Some(SubspaceSource::Residual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceOptions {
    pub rank: usize,
    pub oversample: usize,
    pub seed: u64,
    pub source: SubspaceSource,
    /// Scale the basis to `V·Σ⁻¹`.
    pub precondition: bool,
    /// Parameters allowed to move; `None` means all.
    pub param_mask: Option<Vec<bool>>,
}

impl SubspaceOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            oversample: 10,
            seed: 0,
            source: SubspaceSource::Output,
            precondition: false,
            param_mask: None,
        }
    }

    pub fn sketch_width(&self) -> usize {
        self.rank + self.oversample
    }

    pub(crate) fn validate(&self, param_dim: usize) -> Result<()> {
        if self.rank == 0 {
            return Err(LsrError::Invalid("rank must be at least 1".into()));
        }
        if let Some(mask) = &self.param_mask {
            if mask.len() != param_dim {
                return Err(LsrError::Shape {
                    what: "parameter mask length",
                    expected: param_dim,
                    got: mask.len(),
                });
            }
        }
        let active = self.active_params(param_dim);
        if self.rank > active {
            return Err(LsrError::RankDeficient {
                requested: self.rank,
                available: active,
            });
        }
        Ok(())
    }

    fn active_params(&self, param_dim: usize) -> usize {
        self.param_mask
            .as_ref()
            .map_or(param_dim, |m| m.iter().filter(|&&b| b).count())
    }

    /// Ω with rows outside the mask zeroed. The sketch is never wider than
    /// the number of free parameters.
    pub(crate) fn omega(&self, param_dim: usize) -> DenseMatrix {
        let k = self.sketch_width().min(self.active_params(param_dim));
        let mut omega = gaussian_sketch(param_dim, k, self.seed);
        if let Some(mask) = &self.param_mask {
            for (i, &keep) in mask.iter().enumerate() {
                if !keep {
                    omega.row_mut(i).iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
        omega
    }
}

/// Bernoulli mask with the given keep probability.
pub fn random_mask(len: usize, density: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>() < density).collect()
}

/// Correction basis `V` (m×r). Without preconditioning the columns are
/// orthonormal; with it, column j is the orthonormal vector divided by
/// `sigma[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub v: DenseMatrix,
    pub sigma: Vec<f64>,
    pub preconditioned: bool,
    pub source: SubspaceSource,
    pub sketch_width: usize,
}

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.v.cols()
    }

    pub fn param_dim(&self) -> usize {
        self.v.rows()
    }

    /// The basis spanned by the first `r` columns.
    pub fn leading(&self, r: usize) -> SubspaceBasis {
        SubspaceBasis {
            v: self.v.leading_columns(r),
            sigma: self.sigma[..r].to_vec(),
            preconditioned: self.preconditioned,
            source: self.source,
            sketch_width: self.sketch_width,
        }
    }

    /// `Δθ = V[:, ..y.len()]·y`.
    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        super::prefix_matvec(&self.v, y)
    }
}

pub(crate) fn sketch_dim(problem: &dyn ResidualProblem, source: SubspaceSource) -> usize {
    match source {
        SubspaceSource::Output => problem.output_dim(),
        SubspaceSource::Residual => problem.residual_dim(),
    }
}

fn forward_action(lin: &dyn Linearization, source: SubspaceSource, v: &[f64]) -> Result<Vec<f64>> {
    Ok(match source {
        SubspaceSource::Output => lin.j_action(v)?,
        SubspaceSource::Residual => lin.aj_action(v)?,
    })
}

fn adjoint_action(lin: &dyn Linearization, source: SubspaceSource, u: &[f64]) -> Result<Vec<f64>> {
    Ok(match source {
        SubspaceSource::Output => lin.jt_action(u)?,
        SubspaceSource::Residual => lin.gt_action(u)?,
    })
}

/// `QᵀJ` (k×m) for the orthonormal range basis Q of `J·Ω`, with columns
/// outside the mask zeroed.
pub(crate) fn projected_jacobian(
    lin: &dyn Linearization,
    opts: &SubspaceOptions,
    omega: &DenseMatrix,
) -> Result<DenseMatrix> {
    let k = omega.cols();
    let y_cols = (0..k)
        .into_par_iter()
        .map(|j| forward_action(lin, opts.source, &omega.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let y = DenseMatrix::from_columns(&y_cols);
    if !y.is_finite() {
        return Err(LsrError::NonFinite("sketch J·Ω"));
    }
    let q = HouseholderQr::new(&y)?.thin_q();
    let b_rows = (0..k)
        .into_par_iter()
        .map(|j| {
            let mut row = adjoint_action(lin, opts.source, &q.column(j))?;
            if let Some(mask) = &opts.param_mask {
                for (x, &keep) in row.iter_mut().zip(mask) {
                    if !keep {
                        *x = 0.0;
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_rows(&b_rows))
}

/// Leading right singular vectors of the projected Jacobian.
pub(crate) fn basis_from_projection(b: &DenseMatrix, opts: &SubspaceOptions) -> Result<SubspaceBasis> {
    if !b.is_finite() {
        return Err(LsrError::NonFinite("projected Jacobian"));
    }
    let svd = thin_svd_qr(b)?;
    if svd.rank() < opts.rank {
        return Err(LsrError::RankDeficient {
            requested: opts.rank,
            available: svd.rank(),
        });
    }
    let r = opts.rank;
    let mut v = svd.v.leading_columns(r);
    let sigma = svd.sigma[..r].to_vec();
    if let Some(mask) = &opts.param_mask {
        // exact zeros where Householder pivots left rounding residue
        for (i, &keep) in mask.iter().enumerate() {
            if !keep {
                v.row_mut(i).iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
    if opts.precondition {
        for i in 0..v.rows() {
            for (x, s) in v.row_mut(i).iter_mut().zip(&sigma) {
                *x /= s;
            }
        }
    }
    Ok(SubspaceBasis {
        v,
        sigma,
        preconditioned: opts.precondition,
        source: opts.source,
        sketch_width: b.rows(),
    })
}

/// Randomized range finder on the chosen Jacobian followed by a thin SVD of
/// the projected Jacobian. Costs `r + p` forward and `r + p` adjoint actions.
pub fn build_subspace(problem: &dyn ResidualProblem, theta: &[f64], opts: &SubspaceOptions) -> Result<SubspaceBasis> {
    let m = problem.param_dim();
    if theta.len() != m {
        return Err(LsrError::Shape {
            what: "parameter vector length",
            expected: m,
            got: theta.len(),
        });
    }
    opts.validate(m)?;
    let n = sketch_dim(problem, opts.source);
    if opts.sketch_width() > n {
        return Err(LsrError::Invalid(format!(
            "sketch width {} exceeds the {} rows available",
            opts.sketch_width(),
            n
        )));
    }
    let lin = problem.linearize(theta)?;
    let omega = opts.omega(m);
    let b = projected_jacobian(lin.as_ref(), opts, &omega)?;
    basis_from_projection(&b, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{householder_qr, singular_values};
    use crate::residual::LinearResidual;

    pub(crate) fn orth_err(v: &DenseMatrix) -> f64 {
        let g = v.t_matmul(v).unwrap();
        g.sub(&DenseMatrix::identity(v.cols())).unwrap().max_abs()
    }

    /// Sines of the principal angles between span(a) and span(b), both
    /// orthonormal: the singular values of `(I − bbᵀ)a`.
    fn principal_sines(a: &DenseMatrix, b: &DenseMatrix) -> Vec<f64> {
        let proj = b.matmul(&b.t_matmul(a).unwrap()).unwrap();
        singular_values(&a.sub(&proj).unwrap()).unwrap()
    }

    #[test]
    fn recovers_top_singular_subspace_of_diagonal_model() {
        let a = DenseMatrix::diag(&[3.0, 2.0, 1.0, 0.0, 0.0]);
        let p = LinearResidual::new(a, vec![1.0; 5]).unwrap();
        let opts = SubspaceOptions {
            oversample: 2,
            seed: 11,
            ..SubspaceOptions::new(3)
        };
        let basis = build_subspace(&p, &[0.0; 5], &opts).unwrap();
        assert!(orth_err(&basis.v) <= 1e-12);
        for (s, e) in basis.sigma.iter().zip([3.0, 2.0, 1.0]) {
            assert!((s - e).abs() <= 1e-12);
        }
        let exact = DenseMatrix::identity(5).leading_columns(3);
        for s in principal_sines(&basis.v, &exact) {
            assert!(s <= 1e-8, "{s}");
        }
    }

    #[test]
    fn random_matrix_subspace_matches_dense_svd() {
        // Strong decay so a sketch with modest oversampling captures the
        // leading subspace exactly up to rounding.
        let n = 30;
        let m = 20;
        let u = householder_qr(&gaussian_sketch(n, m, 1)).unwrap().q;
        let w = householder_qr(&gaussian_sketch(m, m, 2)).unwrap().q;
        let mut us = u.clone();
        for i in 0..n {
            for j in 0..m {
                us.set(i, j, u.get(i, j) * 0.5f64.powi(j as i32));
            }
        }
        let a = us.matmul(&w.transpose()).unwrap();
        let p = LinearResidual::new(a, vec![0.0; n]).unwrap();
        let opts = SubspaceOptions {
            oversample: 15,
            ..SubspaceOptions::new(4)
        };
        let basis = build_subspace(&p, &vec![0.0; m], &opts).unwrap();
        let exact = w.leading_columns(4);
        for s in principal_sines(&basis.v, &exact) {
            assert!(s <= 1e-8, "{s}");
        }
    }

    #[test]
    fn same_seed_same_basis() {
        let p = LinearResidual::new(gaussian_sketch(25, 10, 3), vec![0.0; 25]).unwrap();
        let opts = SubspaceOptions::new(5);
        let a = build_subspace(&p, &[0.1; 10], &opts).unwrap();
        let b = build_subspace(&p, &[0.1; 10], &opts).unwrap();
        assert_eq!(a, b);
        let c = build_subspace(&p, &[0.1; 10], &SubspaceOptions { seed: 1, ..opts }).unwrap();
        assert_ne!(a.v, c.v);
    }

    #[test]
    fn preconditioned_columns_are_scaled_by_sigma() {
        let p = LinearResidual::new(gaussian_sketch(25, 10, 3), vec![0.0; 25]).unwrap();
        let plain = build_subspace(&p, &[0.0; 10], &SubspaceOptions::new(4)).unwrap();
        let pre = build_subspace(
            &p,
            &[0.0; 10],
            &SubspaceOptions {
                precondition: true,
                ..SubspaceOptions::new(4)
            },
        )
        .unwrap();
        assert!(pre.preconditioned);
        assert_eq!(plain.sigma, pre.sigma);
        for i in 0..10 {
            for j in 0..4 {
                assert_eq!(pre.v.get(i, j), plain.v.get(i, j) / plain.sigma[j]);
            }
        }
    }

    #[test]
    fn mask_confines_the_basis() {
        let p = LinearResidual::new(gaussian_sketch(40, 16, 4), vec![0.0; 40]).unwrap();
        let mask = random_mask(16, 0.5, 9);
        let active = mask.iter().filter(|&&b| b).count();
        assert!(active >= 4);
        let opts = SubspaceOptions {
            oversample: 2,
            param_mask: Some(mask.clone()),
            ..SubspaceOptions::new(3)
        };
        let basis = build_subspace(&p, &[0.0; 16], &opts).unwrap();
        assert!(orth_err(&basis.v) <= 1e-12);
        for (i, &keep) in mask.iter().enumerate() {
            if !keep {
                assert!(basis.v.row(i).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let p = LinearResidual::new(DenseMatrix::diag(&[3.0, 2.0, 0.0, 0.0, 0.0]), vec![0.0; 5]).unwrap();
        let opts = SubspaceOptions {
            oversample: 1,
            ..SubspaceOptions::new(3)
        };
        assert_eq!(
            build_subspace(&p, &[0.0; 5], &opts).unwrap_err(),
            LsrError::RankDeficient {
                requested: 3,
                available: 2
            }
        );
    }

    #[test]
    fn oversized_sketch_rejected() {
        let p = LinearResidual::new(gaussian_sketch(5, 8, 1), vec![0.0; 5]).unwrap();
        assert!(matches!(
            build_subspace(&p, &[0.0; 8], &SubspaceOptions::new(3)),
            Err(LsrError::Invalid(_))
        ));
        assert!(build_subspace(&p, &[0.0; 8], &SubspaceOptions::new(0)).is_err());
    }
}
