use std::fmt::Write as _;

use super::Result;
use crate::lsr::{build_subspace, one_shot_lsr, LsrError, SubspaceOptions};
use crate::opt::fmt_f64;
use crate::residual::{self, Linearization, ResidualProblem};

/// Target value of the scalar model; unreachable because `q ≥ 2`.
pub const SCALAR_TARGET: f64 = 1.0;

/// One-parameter model `q(θ) = (θ − 1)² + 2` with residual `q − 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarProblem;

impl ScalarProblem {
    pub fn q(theta: f64) -> f64 {
        (theta - 1.0).powi(2) + 2.0
    }

    pub fn dq(theta: f64) -> f64 {
        2.0 * (theta - 1.0)
    }
}

struct ScalarLin {
    q: [f64; 1],
    f: [f64; 1],
    dq: f64,
}

impl Linearization for ScalarLin {
    fn residual(&self) -> &[f64] {
        &self.f
    }

    fn outputs(&self) -> &[f64] {
        &self.q
    }

    fn j_action(&self, v: &[f64]) -> residual::Result<Vec<f64>> {
        Ok(vec![self.dq * v[0]])
    }

    fn jt_action(&self, u: &[f64]) -> residual::Result<Vec<f64>> {
        Ok(vec![self.dq * u[0]])
    }

    fn aj_action(&self, v: &[f64]) -> residual::Result<Vec<f64>> {
        self.j_action(v)
    }

    fn gt_action(&self, w: &[f64]) -> residual::Result<Vec<f64>> {
        self.jt_action(w)
    }
}

impl ResidualProblem for ScalarProblem {
    fn param_dim(&self) -> usize {
        1
    }

    fn residual_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn linearize<'a>(&'a self, theta: &'a [f64]) -> residual::Result<Box<dyn Linearization + 'a>> {
        if theta.len() != 1 {
            return Err(residual::ResidualError::Shape {
                what: "scalar parameter",
                expected: 1,
                got: theta.len(),
            });
        }
        let q = Self::q(theta[0]);
        Ok(Box::new(ScalarLin {
            q: [q],
            f: [q - SCALAR_TARGET],
            dq: Self::dq(theta[0]),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRow {
    pub theta0: f64,
    pub q: f64,
    pub dq: f64,
    /// One-shot LSR correction; zero when the derivative vanishes.
    pub delta_theta: f64,
    /// `q(θ₀) + q'(θ₀)·Δθ`.
    pub linearized_prediction: f64,
    pub linearized_residual: f64,
    /// `q(θ₀ + Δθ)`, what the nonlinear model actually produces.
    pub nonlinear_prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarReport {
    pub rows: Vec<ScalarRow>,
    pub target: f64,
    /// `min_θ q(θ)`, attained at θ = 1.
    pub min_q: f64,
    pub target_feasible: bool,
}

impl ScalarReport {
    pub fn row(&self, theta0: f64) -> Option<&ScalarRow> {
        self.rows.iter().find(|r| r.theta0 == theta0)
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("theta0,q,dq,delta_theta,linearized_prediction,linearized_residual,nonlinear_prediction\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                fmt_f64(r.theta0),
                fmt_f64(r.q),
                fmt_f64(r.dq),
                fmt_f64(r.delta_theta),
                fmt_f64(r.linearized_prediction),
                fmt_f64(r.linearized_residual),
                fmt_f64(r.nonlinear_prediction)
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "target q* = {}; min q = {} at theta = 1; target {}",
            fmt_f64(self.target),
            fmt_f64(self.min_q),
            if self.target_feasible {
                "feasible"
            } else {
                "infeasible for the nonlinear model"
            }
        )
    }
}

/// One-shot LSR on the scalar model from θ₀ ∈ {0, 0.5, 1, 2}.
pub fn scalar_demo() -> Result<ScalarReport> {
    let p = ScalarProblem;
    let opts = SubspaceOptions {
        oversample: 0,
        ..SubspaceOptions::new(1)
    };
    let mut rows = Vec::new();
    for theta0 in [0.0, 0.5, 1.0, 2.0] {
        let theta = [theta0];
        let delta = match build_subspace(&p, &theta, &opts) {
            Ok(basis) => one_shot_lsr(&p, &theta, &basis)?.delta_theta[0],
            // q'(θ₀) = 0: the Jacobian offers no direction at all
            Err(LsrError::RankDeficient { available: 0, .. }) => 0.0,
            Err(e) => return Err(e.into()),
        };
        let q = ScalarProblem::q(theta0);
        let dq = ScalarProblem::dq(theta0);
        let lin = q + dq * delta;
        rows.push(ScalarRow {
            theta0,
            q,
            dq,
            delta_theta: delta,
            linearized_prediction: lin,
            linearized_residual: lin - SCALAR_TARGET,
            nonlinear_prediction: ScalarProblem::q(theta0 + delta),
        });
    }
    let min_q = ScalarProblem::q(1.0);
    Ok(ScalarReport {
        rows,
        target: SCALAR_TARGET,
        min_q,
        target_feasible: min_q <= SCALAR_TARGET,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        let rep = scalar_demo().unwrap();
        let r0 = rep.row(0.0).unwrap();
        assert_eq!(
            (r0.q, r0.dq, r0.delta_theta, r0.linearized_prediction),
            (3.0, -2.0, 1.0, 1.0)
        );
        assert_eq!(r0.nonlinear_prediction, 2.0);
        let r5 = rep.row(0.5).unwrap();
        assert_eq!((r5.q, r5.dq), (2.25, -1.0));
        assert!((r5.delta_theta - 1.25).abs() <= 1e-14);
        let r2 = rep.row(2.0).unwrap();
        assert!((r2.delta_theta + 1.0).abs() <= 1e-14);
        let r1 = rep.row(1.0).unwrap();
        assert_eq!((r1.dq, r1.delta_theta, r1.linearized_residual), (0.0, 0.0, 1.0));
        assert_eq!(rep.min_q, 2.0);
        assert!(!rep.target_feasible);
        assert!(rep.summary().contains("infeasible"));
    }

    #[test]
    fn nonlinear_model_never_reaches_target() {
        for i in -200..=200 {
            assert!(ScalarProblem::q(i as f64 / 50.0) >= 2.0);
        }
    }
}
