use super::{OptError, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix};

/// A linear map known only through its actions.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_t(&self, y: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x).expect("operator width")
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.t_matvec(y).expect("operator height")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    /// ‖b − Ax_k‖ after each iteration (recurrence estimate for LSQR).
    pub residual_norms: Vec<f64>,
    /// ‖Aᵀ(b − Ax_k)‖ / ‖Aᵀb‖ after each iteration.
    pub normal_residuals: Vec<f64>,
    pub converged: bool,
}

impl KrylovResult {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len()
    }
}

fn check(op: &dyn LinearOperator, b: &[f64]) -> Result<()> {
    if b.len() != op.rows() {
        return Err(OptError::Dimension {
            what: "right-hand side length",
            expected: op.rows(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Conjugate gradients on the normal equations, `min ‖Ax − b‖` from x = 0.
/// Stops when `‖Aᵀr‖ ≤ tol·‖Aᵀb‖` or after `max_iters` iterations.
pub fn cgls_solve(op: &dyn LinearOperator, b: &[f64], max_iters: usize, tol: f64) -> Result<KrylovResult> {
    check(op, b)?;
    let mut x = vec![0.0; op.cols()];
    let mut r = b.to_vec();
    let mut s = op.apply_t(&r);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let s0 = gamma.sqrt();
    let mut out = KrylovResult {
        x: Vec::new(),
        residual_norms: Vec::new(),
        normal_residuals: Vec::new(),
        converged: s0 == 0.0,
    };
    if out.converged {
        out.x = x;
        return Ok(out);
    }
    for k in 0..max_iters {
        let q = op.apply(&p);
        let delta = dot(&q, &q);
        if delta == 0.0 || !delta.is_finite() {
            return Err(OptError::Breakdown {
                iteration: k,
                reason: "‖Ap‖ vanished",
            });
        }
        let alpha = gamma / delta;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        s = op.apply_t(&r);
        let gamma_new = dot(&s, &s);
        out.residual_norms.push(norm2(&r));
        let rel = gamma_new.sqrt() / s0;
        out.normal_residuals.push(rel);
        if rel <= tol {
            out.converged = true;
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    out.x = x;
    Ok(out)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|e| *e /= n);
    }
    n
}

/// Golub–Kahan bidiagonalization LSQR, `min ‖Ax − b‖` from x = 0, with the
/// same stopping rule as [`cgls_solve`] applied to the recurrence estimate
/// of the normal residual.
pub fn lsqr_solve(op: &dyn LinearOperator, b: &[f64], max_iters: usize, tol: f64) -> Result<KrylovResult> {
    check(op, b)?;
    let n = op.cols();
    let mut x = vec![0.0; n];
    let mut u = b.to_vec();
    let mut beta = normalize(&mut u);
    let mut v = if beta > 0.0 { op.apply_t(&u) } else { vec![0.0; n] };
    let mut alpha = normalize(&mut v);
    let atb = alpha * beta;
    let mut out = KrylovResult {
        x: Vec::new(),
        residual_norms: Vec::new(),
        normal_residuals: Vec::new(),
        converged: atb == 0.0,
    };
    if out.converged {
        out.x = x;
        return Ok(out);
    }
    let mut w = v.clone();
    let mut phi_bar = beta;
    let mut rho_bar = alpha;
    for k in 0..max_iters {
        // β·u ← A·v − α·u
        let av = op.apply(&v);
        for (ui, ai) in u.iter_mut().zip(&av) {
            *ui = ai - alpha * *ui;
        }
        beta = normalize(&mut u);
        // α·v ← Aᵀ·u − β·v
        if beta > 0.0 {
            let atu = op.apply_t(&u);
            for (vi, ai) in v.iter_mut().zip(&atu) {
                *vi = ai - beta * *vi;
            }
            alpha = normalize(&mut v);
        } else {
            alpha = 0.0;
        }

        let rho = rho_bar.hypot(beta);
        if rho == 0.0 || !rho.is_finite() {
            return Err(OptError::Breakdown {
                iteration: k,
                reason: "bidiagonalization produced a zero pivot",
            });
        }
        let c = rho_bar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rho_bar = -c * alpha;
        let phi = c * phi_bar;
        phi_bar *= s;

        axpy(phi / rho, &w, &mut x);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - (theta / rho) * *wi;
        }

        out.residual_norms.push(phi_bar);
        let rel = phi_bar * alpha * c.abs() / atb;
        out.normal_residuals.push(rel);
        if rel <= tol {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_sketch, lstsq};

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d / norm2(b)
    }

    #[test]
    fn identity_in_one_iteration() {
        let a = DenseMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        for solve in [cgls_solve, lsqr_solve] {
            let r = solve(&a, &b, 10, 1e-12).unwrap();
            assert_eq!(r.iterations(), 1);
            assert!(rel(&r.x, &b) < 1e-15);
        }
    }

    #[test]
    fn matches_dense_least_squares() {
        let a = gaussian_sketch(30, 10, 5);
        let b = gaussian_sketch(30, 1, 6).into_vec();
        let direct = lstsq(&a, &b).unwrap();
        for solve in [cgls_solve, lsqr_solve] {
            let r = solve(&a, &b, 15, 1e-14).unwrap();
            assert!(rel(&r.x, &direct) <= 1e-8, "{}", rel(&r.x, &direct));
        }
    }

    #[test]
    fn consistent_well_conditioned_system() {
        let a = gaussian_sketch(40, 8, 1);
        let xt = gaussian_sketch(8, 1, 2).into_vec();
        let b = a.matvec(&xt).unwrap();
        for solve in [cgls_solve, lsqr_solve] {
            let r = solve(&a, &b, 8 + 5, 1e-14).unwrap();
            let res: Vec<f64> = a.matvec(&r.x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm2(&res) / norm2(&b) <= 1e-10);
        }
    }

    #[test]
    fn two_by_two_diagonal_needs_more_than_one_step() {
        let a = DenseMatrix::diag(&[1.0, 1e3]);
        let b = vec![1.0, 1.0];
        let r = cgls_solve(&a, &b, 50, 1e-10).unwrap();
        assert!(r.normal_residuals[0] > 1e-4);
        assert!(r.iterations() >= 2);
    }

    /// A spread spectrum keeps the Krylov method busy far beyond the
    /// well-conditioned count.
    #[test]
    fn spread_spectrum_converges_slowly() {
        let sigma: Vec<f64> = (0..100).map(|i| 10f64.powf(3.0 * i as f64 / 99.0)).collect();
        let a = DenseMatrix::diag(&sigma);
        let b = vec![1.0; 100];
        let well = cgls_solve(&DenseMatrix::diag(&vec![2.0; 100]), &b, 500, 1e-10).unwrap();
        let ill = cgls_solve(&a, &b, 500, 1e-10).unwrap();
        assert_eq!(well.iterations(), 1);
        assert!(ill.iterations() > 20, "{}", ill.iterations());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(cgls_solve(&DenseMatrix::identity(3), &[1.0], 3, 1e-8).is_err());
        assert!(lsqr_solve(&DenseMatrix::identity(3), &[1.0], 3, 1e-8).is_err());
    }
}
