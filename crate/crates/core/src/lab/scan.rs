use std::fmt::Write as _;

use super::{LabError, Result};
use crate::linalg::{dot, norm2};
use crate::lsr::{build_subspace, one_shot_lsr, SubspaceOptions};
use crate::opt::fmt_f64;
use crate::residual::{half_sq_norm, ResidualProblem};

/// 33 log-spaced step lengths on [1e-4, 2], plus the full step 1 and the
/// probes 0, −1e-2 and −1, sorted.
pub fn default_alphas() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 2f64.ln());
    let mut a: Vec<f64> = (0..33).map(|i| (lo + (hi - lo) * i as f64 / 32.0).exp()).collect();
    a.extend([0.0, 1.0, -1e-2, -1.0]);
    a.sort_by(f64::total_cmp);
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub alpha: f64,
    /// `½‖f(θ₀ + αΔθ)‖²`; NaN when the evaluation was not finite.
    pub nonlinear_loss: f64,
    /// `½‖f(θ₀) + α·(AJ)Δθ‖²`.
    pub linearized_loss: f64,
    pub finite: bool,
}

/// Loss along `θ₀ + αΔθ` for the nonlinear model and its linearization. The
/// linearized loss is the quadratic `c0 − α·c1 + ½α²·c2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionScan {
    pub rows: Vec<ScanRow>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl DirectionScan {
    pub fn quadratic(&self, alpha: f64) -> f64 {
        self.c0 - alpha * self.c1 + 0.5 * alpha * alpha * self.c2
    }

    pub fn at(&self, alpha: f64) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,nonlinear_loss,linearized_loss,finite\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_f64(r.alpha),
                fmt_f64(r.nonlinear_loss),
                fmt_f64(r.linearized_loss),
                r.finite
            );
        }
        s
    }
}

pub fn direction_scan(
    problem: &dyn ResidualProblem,
    theta: &[f64],
    delta_theta: &[f64],
    alphas: &[f64],
) -> Result<DirectionScan> {
    if !alphas.contains(&0.0) {
        return Err(LabError::Invalid("the step grid must contain 0".into()));
    }
    if delta_theta.len() != theta.len() {
        return Err(LabError::Invalid(format!(
            "direction has length {} but θ has {}",
            delta_theta.len(),
            theta.len()
        )));
    }
    let lin = problem.linearize(theta)?;
    let f0 = lin.residual();
    let g = lin.aj_action(delta_theta)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let lf: Vec<f64> = f0.iter().zip(&g).map(|(f, d)| f + alpha * d).collect();
        let linearized_loss = half_sq_norm(&lf);
        let moved: Vec<f64> = theta.iter().zip(delta_theta).map(|(t, d)| t + alpha * d).collect();
        let nonlinear = problem.loss(&moved).ok().filter(|l| l.is_finite());
        rows.push(ScanRow {
            alpha,
            nonlinear_loss: nonlinear.unwrap_or(f64::NAN),
            linearized_loss,
            finite: nonlinear.is_some() && linearized_loss.is_finite(),
        });
    }
    Ok(DirectionScan {
        rows,
        c0: half_sq_norm(f0),
        c1: -dot(f0, &g),
        c2: dot(&g, &g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    /// ‖Gᵀf‖ at θ₀.
    pub grad_norm: f64,
    pub residual_norm: f64,
    /// Largest singular value found by the subspace sketch, a lower bound
    /// on ‖G‖ when the basis is drawn from G.
    pub jacobian_scale: f64,
    /// ‖(AJ)Δθ*‖ after one-shot LSR.
    pub correction_norm: f64,
    pub loss_before: f64,
    pub loss_after: f64,
}

impl StationarityReport {
    pub fn relative_correction(&self) -> f64 {
        self.correction_norm / self.residual_norm.max(f64::MIN_POSITIVE)
    }

    /// `‖Gᵀf‖ / (‖G‖·‖f‖)` with the sketched scale standing in for ‖G‖.
    pub fn relative_gradient(&self) -> f64 {
        self.grad_norm / (self.jacobian_scale * self.residual_norm).max(f64::MIN_POSITIVE)
    }
}

/// Gradient norm and one-shot LSR effect at θ₀. A sketch that finds no
/// direction at all (G = 0) reports a zero correction.
pub fn stationarity_probe(
    problem: &dyn ResidualProblem,
    theta: &[f64],
    opts: &SubspaceOptions,
) -> Result<StationarityReport> {
    let lin = problem.linearize(theta)?;
    let f0 = lin.residual();
    let grad_norm = norm2(&lin.gradient()?);
    let residual_norm = norm2(f0);
    let loss_before = half_sq_norm(f0);
    let opts = SubspaceOptions {
        source: crate::lsr::SubspaceSource::Residual,
        ..opts.clone()
    };
    let basis = match build_subspace(problem, theta, &opts) {
        Ok(b) => b,
        Err(crate::lsr::LsrError::RankDeficient { available: 0, .. }) => {
            return Ok(StationarityReport {
                grad_norm,
                residual_norm,
                jacobian_scale: 0.0,
                correction_norm: 0.0,
                loss_before,
                loss_after: loss_before,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let res = one_shot_lsr(problem, theta, &basis)?;
    let change = lin.aj_action(&res.delta_theta)?;
    Ok(StationarityReport {
        grad_norm,
        residual_norm,
        jacobian_scale: basis.sigma[0],
        correction_norm: norm2(&change),
        loss_before,
        loss_after: res.loss_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_sketch, lstsq, DenseMatrix};
    use crate::net::{init_params, Activation, MlpArchitecture};
    use crate::residual::{supervised_residual, LinearResidual};

    #[test]
    fn default_grid_shape() {
        let a = default_alphas();
        assert_eq!(a.len(), 37);
        assert_eq!(a[0], -1.0);
        assert!(a.contains(&0.0) && a.contains(&1.0) && a.contains(&-1e-2));
        assert!((a[a.len() - 1] - 2.0).abs() < 1e-14);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn linearized_loss_is_the_fitted_quadratic_with_minimum_at_lsr_step() {
        let arch = MlpArchitecture::new(2, 1, vec![10], Activation::Tanh).unwrap();
        let x = gaussian_sketch(60, 2, 1);
        let y = gaussian_sketch(60, 1, 2);
        let p = supervised_residual(&arch, &x, &y).unwrap();
        let theta = init_params(&arch, 5);
        let res = one_shot_lsr(
            &p,
            &theta,
            &build_subspace(&p, &theta, &SubspaceOptions::new(8)).unwrap(),
        )
        .unwrap();
        let scan = direction_scan(&p, &theta, &res.delta_theta, &default_alphas()).unwrap();
        let zero = scan.at(0.0).unwrap();
        assert_eq!(zero.nonlinear_loss, zero.linearized_loss);
        assert!((zero.linearized_loss - res.loss_before).abs() <= 1e-14 * res.loss_before);
        for r in &scan.rows {
            let q = scan.quadratic(r.alpha);
            assert!((r.linearized_loss - q).abs() <= 1e-10 * scan.c0, "{r:?}");
        }
        // vertex of the quadratic
        assert!((scan.c1 / scan.c2 - 1.0).abs() <= 1e-8);
        let one = direction_scan(&p, &theta, &res.delta_theta, &[0.0, 1.0]).unwrap();
        assert!((one.at(1.0).unwrap().linearized_loss - res.loss_after).abs() <= 1e-10 * res.loss_after);
    }

    #[test]
    fn grid_without_zero_rejected() {
        let p = LinearResidual::new(DenseMatrix::identity(2), vec![1.0, 1.0]).unwrap();
        assert!(direction_scan(&p, &[0.0; 2], &[1.0; 2], &[1.0]).is_err());
    }

    #[test]
    fn exact_least_squares_point_is_stationary() {
        let a = gaussian_sketch(30, 6, 3);
        let b = gaussian_sketch(30, 1, 4).into_vec();
        let theta = lstsq(&a, &b).unwrap();
        let p = LinearResidual::new(a, b).unwrap();
        let rep = stationarity_probe(&p, &theta, &SubspaceOptions::new(4)).unwrap();
        assert!(rep.relative_gradient() <= 1e-10, "{rep:?}");
        assert!(rep.relative_correction() <= 1e-8, "{rep:?}");

        let moved: Vec<f64> = theta
            .iter()
            .enumerate()
            .map(|(i, t)| t + 1e-2 * (i as f64 - 2.5))
            .collect();
        let rep = stationarity_probe(&p, &moved, &SubspaceOptions::new(4)).unwrap();
        assert!(rep.correction_norm > 0.0);
        assert!(rep.loss_after < rep.loss_before);
    }

    #[test]
    fn zero_jacobian_reports_no_correction() {
        let p = LinearResidual::new(DenseMatrix::zeros(4, 2), vec![1.0; 4]).unwrap();
        let rep = stationarity_probe(
            &p,
            &[0.0; 2],
            &SubspaceOptions {
                oversample: 0,
                ..SubspaceOptions::new(1)
            },
        )
        .unwrap();
        assert_eq!(rep.correction_norm, 0.0);
        assert_eq!(rep.loss_after, rep.loss_before);
    }
}
