use super::{LabError, Result};
use crate::linalg::{dot, lstsq, DenseMatrix, HouseholderQr};
use crate::lsr::{reduced_matrix, SubspaceBasis};
use crate::opt::{LinearOperator, Objective, OptError};
use crate::residual::{Linearization, ResidualProblem};

enum Operator<'a> {
    /// Materialized reduced matrix `AJV` (n×r).
    Reduced(DenseMatrix),
    /// Matrix-free `AJ` (n×m) through the linearization's actions.
    Full(Box<dyn Linearization + 'a>),
}

/// `min_x ½‖K·x − b‖²` with `b = −f(θ₀)` and `K` either `AJV` or `AJ`.
/// Every solver sees the same operator and right-hand side.
pub struct LinearizedProblem<'a> {
    op: Operator<'a>,
    rhs: Vec<f64>,
    cols: usize,
}

impl<'a> LinearizedProblem<'a> {
    /// Reduced problem in the coordinates `y` of a subspace basis.
    pub fn reduced(
        problem: &dyn ResidualProblem,
        theta: &[f64],
        basis: &SubspaceBasis,
    ) -> Result<LinearizedProblem<'static>> {
        let lin = problem.linearize(theta)?;
        let m = reduced_matrix(lin.as_ref(), basis)?;
        Ok(LinearizedProblem {
            cols: m.cols(),
            op: Operator::Reduced(m),
            rhs: lin.residual().iter().map(|x| -x).collect(),
        })
    }

    /// Full-space problem in Δθ; nothing is materialized.
    pub fn full(problem: &'a dyn ResidualProblem, theta: &'a [f64]) -> Result<Self> {
        let lin = problem.linearize(theta)?;
        let rhs = lin.residual().iter().map(|x| -x).collect();
        Ok(LinearizedProblem {
            op: Operator::Full(lin),
            rhs,
            cols: problem.param_dim(),
        })
    }

    /// Wraps an explicit matrix; used for synthetic conditioning studies.
    pub fn from_dense(k: DenseMatrix, rhs: Vec<f64>) -> Result<LinearizedProblem<'static>> {
        if k.rows() != rhs.len() {
            return Err(LabError::Invalid(format!(
                "operator has {} rows but right-hand side has {}",
                k.rows(),
                rhs.len()
            )));
        }
        Ok(LinearizedProblem {
            cols: k.cols(),
            op: Operator::Reduced(k),
            rhs,
        })
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self.op, Operator::Reduced(_))
    }

    pub fn dense(&self) -> Option<&DenseMatrix> {
        match &self.op {
            Operator::Reduced(m) => Some(m),
            Operator::Full(_) => None,
        }
    }

    fn residual_of(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x).iter().zip(&self.rhs).map(|(a, b)| a - b).collect()
    }

    /// `½‖K·x − b‖²`.
    pub fn loss(&self, x: &[f64]) -> f64 {
        let r = self.residual_of(x);
        0.5 * dot(&r, &r)
    }

    /// Direct least-squares solution. The reduced operator is factored as
    /// is; the full operator is materialized row by row and solved for the
    /// minimum-norm solution through a QR of its transpose when it is wide.
    pub fn direct_solve(&self) -> Result<Vec<f64>> {
        match &self.op {
            Operator::Reduced(m) => Ok(lstsq(m, &self.rhs)?),
            Operator::Full(lin) => {
                let n = self.rhs.len();
                let rows = (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        lin.gt_action(&e)
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let k = DenseMatrix::from_rows(&rows);
                if k.rows() >= k.cols() {
                    return Ok(lstsq(&k, &self.rhs)?);
                }
                // K = Rᵀ·Qᵀ, x = Q·R⁻ᵀ·b
                let qr = HouseholderQr::new(&k.transpose())?;
                let z = forward_substitute(qr.r(), &self.rhs)?;
                Ok(qr.thin_q().matvec(&z)?)
            }
        }
    }
}

/// Solves `rᵀ·z = b` for upper-triangular `r`.
fn forward_substitute(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = r.rows();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let d = r.get(i, i);
        if d == 0.0 {
            return Err(LabError::Invalid(format!("operator rank deficient at row {i}")));
        }
        let s: f64 = (0..i).map(|k| r.get(k, i) * z[k]).sum();
        z[i] = (b[i] - s) / d;
    }
    Ok(z)
}

impl LinearOperator for LinearizedProblem<'_> {
    fn rows(&self) -> usize {
        self.rhs.len()
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Reduced(m) => m.matvec(x).expect("operator width"),
            Operator::Full(lin) => lin.aj_action(x).expect("operator width"),
        }
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Reduced(m) => m.t_matvec(y).expect("operator height"),
            Operator::Full(lin) => lin.gt_action(y).expect("operator height"),
        }
    }
}

impl Objective for LinearizedProblem<'_> {
    fn dim(&self) -> usize {
        LinearOperator::cols(self)
    }

    fn loss_and_gradient(&self, x: &[f64]) -> std::result::Result<(f64, Vec<f64>), OptError> {
        if x.len() != self.dim() {
            return Err(OptError::Dimension {
                what: "linearized iterate",
                expected: self.dim(),
                got: x.len(),
            });
        }
        let r = self.residual_of(x);
        let g = self.apply_t(&r);
        Ok((0.5 * dot(&r, &r), g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_sketch;
    use crate::lsr::{build_subspace, one_shot_lsr, SubspaceOptions};
    use crate::net::{init_params, Activation, MlpArchitecture};
    use crate::residual::supervised_residual;

    fn toy() -> (crate::residual::SupervisedProblem, Vec<f64>) {
        wide(8)
    }

    fn wide(hidden: usize) -> (crate::residual::SupervisedProblem, Vec<f64>) {
        let arch = MlpArchitecture::new(2, 1, vec![hidden], Activation::Tanh).unwrap();
        let x = gaussian_sketch(40, 2, 1);
        let y = gaussian_sketch(40, 1, 2);
        (supervised_residual(&arch, &x, &y).unwrap(), init_params(&arch, 3))
    }

    #[test]
    fn reduced_direct_solve_matches_one_shot() {
        let (p, theta) = toy();
        let basis = build_subspace(&p, &theta, &SubspaceOptions::new(10)).unwrap();
        let lp = LinearizedProblem::reduced(&p, &theta, &basis).unwrap();
        let y = lp.direct_solve().unwrap();
        let one = one_shot_lsr(&p, &theta, &basis).unwrap();
        assert!((lp.loss(&y) - one.loss_after).abs() <= 1e-10 * one.loss_after);
        assert_eq!(lp.loss(&[0.0; 10]), one.loss_before);
    }

    #[test]
    fn full_operator_matches_actions_and_gradient() {
        let (p, theta) = toy();
        let lp = LinearizedProblem::full(&p, &theta).unwrap();
        let m = p.param_dim();
        assert_eq!(Objective::dim(&lp), m);
        let x = gaussian_sketch(m, 1, 5).into_vec();
        let (l, g) = lp.loss_and_gradient(&x).unwrap();
        // central differences of an exact quadratic are exact up to rounding
        let d = gaussian_sketch(m, 1, 6).into_vec();
        let h = 1e-3;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let fd = (lp.loss(&xp) - lp.loss(&xm)) / (2.0 * h);
        assert!((fd - dot(&g, &d)).abs() <= 1e-8 * fd.abs().max(1.0));
        assert_eq!(l, lp.loss(&x));
    }

    #[test]
    fn full_direct_solve_interpolates_wide_system() {
        // 65 parameters, 40 residual rows
        let (p, theta) = wide(16);
        let lp = LinearizedProblem::full(&p, &theta).unwrap();
        let x = lp.direct_solve().unwrap();
        let l0 = lp.loss(&vec![0.0; p.param_dim()]);
        assert!(lp.loss(&x) <= 1e-12 * l0, "{} vs {l0}", lp.loss(&x));
    }

    #[test]
    fn dense_wrapper_checks_rows() {
        assert!(LinearizedProblem::from_dense(DenseMatrix::identity(3), vec![1.0; 2]).is_err());
        let lp = LinearizedProblem::from_dense(DenseMatrix::identity(2), vec![1.0; 2]).unwrap();
        assert_eq!(lp.direct_solve().unwrap(), vec![1.0, 1.0]);
    }
}
