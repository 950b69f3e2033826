//! Iterative LSR for collocation PDE problems.
//!
//! Each outer iteration first solves a one-shot LSR on the plain PDE residual
//! (the pseudo-time wrapper at a huge Δτ), which yields the refined interior
//! field q_LSR without touching θ. It then aligns the network to q_LSR by
//! running L-BFGS on the pseudo-time loss anchored at q_LSR with a moderate
//! Δτ. Only the alignment stage moves θ; the deliverable is the refined
//! predictor of the last LSR stage.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::linalg::{norm2, DenseMatrix};
use crate::lsr::{build_subspace, lsr_predict_at, one_shot_lsr, LsrError, LsrResult, SubspaceOptions};
use crate::net::{forward, NetError};
use crate::opt::{fmt_f64, lbfgs_minimize, LbfgsConfig, OptError, ResidualObjective};
use crate::residual::{tsonn_wrap, PdeProblem, ResidualError, ResidualProblem, TsonnConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IlsrError {
    #[error("invalid I-LSR configuration: {0}")]
    Invalid(String),
    #[error("outer iteration {iter}, LSR stage: {source}")]
    Lsr { iter: usize, source: LsrError },
    #[error("outer iteration {iter}, alignment stage: {source}")]
    Align { iter: usize, source: OptError },
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error("reference solution has zero norm")]
    ZeroReference,
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

impl From<NetError> for IlsrError {
    fn from(e: NetError) -> Self {
        IlsrError::Residual(e.into())
    }
}

impl From<LsrError> for IlsrError {
    fn from(e: LsrError) -> Self {
        IlsrError::Lsr { iter: 0, source: e }
    }
}

pub type Result<T> = std::result::Result<T, IlsrError>;

#[derive(Debug, Clone, PartialEq)]
pub struct IlsrConfig {
    pub outer_iters: usize,
    /// Accepted L-BFGS iterations per alignment stage.
    pub align_steps: usize,
    pub delta_tau_align: f64,
    /// Large enough that the pseudo-time term is negligible against the PDE
    /// residual.
    pub delta_tau_lsr: f64,
    pub rank: usize,
    pub oversample: usize,
    /// Sketch seed of the first outer iteration; iteration k uses `seed + k`.
    pub seed: u64,
}

impl Default for IlsrConfig {
    fn default() -> Self {
        Self {
            outer_iters: 5,
            align_steps: 300,
            delta_tau_align: 0.3,
            delta_tau_lsr: 1e10,
            rank: 400,
            oversample: 10,
            seed: 0,
        }
    }
}

impl IlsrConfig {
    pub fn validate(&self) -> Result<()> {
        let tau_ok = |t: f64| t > 0.0 && t.is_finite();
        if self.outer_iters == 0 || self.align_steps == 0 || self.rank == 0 {
            return Err(IlsrError::Invalid(
                "outer_iters, align_steps and rank must be at least 1".into(),
            ));
        }
        if !tau_ok(self.delta_tau_align) || !tau_ok(self.delta_tau_lsr) {
            return Err(IlsrError::Invalid(format!(
                "pseudo-time steps must be positive, got {} and {}",
                self.delta_tau_align, self.delta_tau_lsr
            )));
        }
        Ok(())
    }
}

/// Reference field sampled on a fixed evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub points: DenseMatrix,
    pub values: Vec<f64>,
}

impl Reference {
    pub fn from_fn(points: DenseMatrix, field: &dyn Fn(f64, f64) -> f64) -> Self {
        let values = (0..points.rows())
            .map(|i| field(points.get(i, 0), points.get(i, 1)))
            .collect();
        Self { points, values }
    }

    /// Tensor grid of `nx × ny` nodes including the corners, x fastest.
    pub fn grid(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, field: &dyn Fn(f64, f64) -> f64) -> Self {
        let node = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut data = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.push(node(lo[0], hi[0], nx, i));
                data.push(node(lo[1], hi[1], ny, j));
            }
        }
        let points = DenseMatrix::from_vec(nx * ny, 2, data).expect("grid shape");
        Self::from_fn(points, field)
    }

    pub fn error(&self, prediction: &[f64]) -> Result<f64> {
        error_vs_reference(prediction, &self.values)
    }
}

/// `‖pred − ref‖₂ / ‖ref‖₂`.
pub fn error_vs_reference(prediction: &[f64], reference: &[f64]) -> Result<f64> {
    if prediction.len() != reference.len() {
        return Err(IlsrError::Shape {
            what: "prediction length",
            expected: reference.len(),
            got: prediction.len(),
        });
    }
    let scale = norm2(reference);
    if scale == 0.0 {
        return Err(IlsrError::ZeroReference);
    }
    let diff: Vec<f64> = prediction.iter().zip(reference).map(|(p, r)| p - r).collect();
    Ok(norm2(&diff) / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Lsr,
    Align,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Lsr => "lsr",
            Stage::Align => "align",
        }
    }
}

/// One stage endpoint. LSR rows carry the linearized loss of the refined
/// predictor; alignment rows carry the plain PDE loss of the network.
/// `seconds` is wall time since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlsrRow {
    pub iter: usize,
    pub stage: Stage,
    pub loss: f64,
    pub rel_l2_error: Option<f64>,
    /// Basis rank actually used; below the requested rank only when the
    /// linearization supports fewer directions.
    pub rank: Option<usize>,
    pub kappa: Option<f64>,
    pub y_norm: Option<f64>,
    pub seconds: f64,
}

pub const ILSR_CSV_HEADER: &str = "iter,stage,loss,rel_l2_error,kappa,y_norm,seconds";

/// Stage endpoints in execution order: an `lsr` and an `align` row per
/// outer iteration, iterations counted from 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IlsrTrace {
    pub rows: Vec<IlsrRow>,
}

impl IlsrTrace {
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &IlsrRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut s = format!("{ILSR_CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.stage.name(),
                fmt_f64(r.loss),
                cell(r.rel_l2_error),
                cell(r.kappa),
                cell(r.y_norm),
                fmt_f64(r.seconds)
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlsrOutcome {
    /// Network parameters after the last alignment stage.
    pub theta_final: Vec<f64>,
    /// Linearization point of the last LSR stage; the refined predictor is
    /// `q(x; theta_lsr) + J(x)·last.delta_theta`.
    pub theta_lsr: Vec<f64>,
    pub last: LsrResult,
    pub trace: IlsrTrace,
}

impl IlsrOutcome {
    /// The refined predictor of the last LSR stage at arbitrary inputs.
    pub fn predict(&self, problem: &PdeProblem, x: &DenseMatrix) -> Result<Vec<f64>> {
        let out = lsr_predict_at(problem.architecture(), &self.theta_lsr, &self.last.delta_theta, x)?;
        Ok(out.into_vec())
    }
}

/// Runs `cfg.outer_iters` LSR/alignment pairs from `theta_init`. Any anchor
/// already attached to `problem` is discarded.
pub fn ilsr_run(
    problem: &PdeProblem,
    theta_init: &[f64],
    cfg: &IlsrConfig,
    reference: Option<&Reference>,
) -> Result<IlsrOutcome> {
    cfg.validate()?;
    let base = problem.base();
    base.architecture().check_params(theta_init)?;
    let n_int = base.interior_count();
    let arch = base.architecture();
    let start = Instant::now();
    let mut theta = theta_init.to_vec();
    let mut trace = IlsrTrace::default();
    let mut last = None;
    let mut theta_lsr = theta.clone();

    for k in 1..=cfg.outer_iters {
        let lsr_err = |source: LsrError| IlsrError::Lsr { iter: k, source };

        // Anchoring at the current prediction makes the pseudo-time term
        // vanish at θ, so only its 1/Δτ slope perturbs the linearization.
        let q_now = base.output_at(&theta)?;
        let lsr_problem = tsonn_wrap(
            &base,
            TsonnConfig {
                q0: q_now[..n_int].to_vec(),
                delta_tau: cfg.delta_tau_lsr,
            },
        )?;
        let opts = SubspaceOptions {
            oversample: cfg.oversample,
            seed: cfg.seed.wrapping_add(k as u64 - 1),
            ..SubspaceOptions::new(cfg.rank)
        };
        let basis = match build_subspace(&lsr_problem, &theta, &opts) {
            // An untrained network can support fewer directions than the
            // requested rank; later iterations recover the full rank.
            Err(LsrError::RankDeficient { available, .. }) if available > 0 => {
                let opts = SubspaceOptions {
                    rank: available,
                    ..opts
                };
                build_subspace(&lsr_problem, &theta, &opts)
            }
            other => other,
        }
        .map_err(lsr_err)?;
        let res = one_shot_lsr(&lsr_problem, &theta, &basis).map_err(lsr_err)?;
        let err = match reference {
            Some(r) => {
                let pred = lsr_predict_at(arch, &theta, &res.delta_theta, &r.points).map_err(lsr_err)?;
                Some(r.error(pred.as_slice())?)
            }
            None => None,
        };
        trace.rows.push(IlsrRow {
            iter: k,
            stage: Stage::Lsr,
            loss: res.loss_after,
            rel_l2_error: err,
            rank: Some(res.rank),
            kappa: Some(res.kappa),
            y_norm: Some(res.y_norm),
            seconds: start.elapsed().as_secs_f64(),
        });

        let align_problem = tsonn_wrap(
            &base,
            TsonnConfig {
                q0: res.q_lsr[..n_int].to_vec(),
                delta_tau: cfg.delta_tau_align,
            },
        )?;
        let lbfgs = LbfgsConfig {
            max_steps: cfg.align_steps,
            ..LbfgsConfig::default()
        };
        let (aligned, _) = lbfgs_minimize(&ResidualObjective(&align_problem), &theta, &lbfgs)
            .map_err(|source| IlsrError::Align { iter: k, source })?;
        theta_lsr = std::mem::replace(&mut theta, aligned);
        let err = match reference {
            Some(r) => Some(r.error(forward(arch, &theta, &r.points)?.as_slice())?),
            None => None,
        };
        trace.rows.push(IlsrRow {
            iter: k,
            stage: Stage::Align,
            loss: base.loss(&theta)?,
            rel_l2_error: err,
            rank: None,
            kappa: None,
            y_norm: None,
            seconds: start.elapsed().as_secs_f64(),
        });
        last = Some(res);
    }

    Ok(IlsrOutcome {
        theta_final: theta,
        theta_lsr,
        last: last.expect("at least one outer iteration"),
        trace,
    })
}
