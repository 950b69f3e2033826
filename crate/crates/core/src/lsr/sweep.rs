use std::fmt::Write as _;
use std::time::Instant;

use super::solve::{check_theta, finish, reduced_matrix, ReducedFactor};
use super::{build_subspace, opt_cell, LsrError, Result, SubspaceOptions};
use crate::opt::fmt_f64;
use crate::residual::ResidualProblem;

/// Per-rank outcome. A failed rank keeps its rank and the failure message;
/// its numeric cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rank: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    pub test_error: Option<f64>,
    pub kappa: f64,
    pub y_norm: f64,
    /// Shared basis and factorization time plus this rank's solve.
    pub seconds: f64,
    /// Bytes of dense buffers held for this rank (sketch, projection,
    /// basis, reduced matrix).
    pub peak_memory_bytes: usize,
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSweep {
    pub rows: Vec<SweepRow>,
    /// Last rank of the leading run over which `loss_after` strictly
    /// decreases.
    pub selected: Option<usize>,
}

impl RankSweep {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("rank,loss_before,loss_after,test_error,kappa,y_norm,seconds,peak_memory_bytes,status\n");
        for r in &self.rows {
            let status = match &r.failure {
                None => "ok".to_string(),
                Some(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.rank,
                fmt_f64(r.loss_before),
                fmt_f64(r.loss_after),
                opt_cell(r.test_error),
                fmt_f64(r.kappa),
                fmt_f64(r.y_norm),
                fmt_f64(r.seconds),
                r.peak_memory_bytes,
                status
            );
        }
        s
    }
}

fn monotone_selection(rows: &[SweepRow]) -> Option<usize> {
    let mut selected = None;
    let mut prev = f64::INFINITY;
    for r in rows {
        if !r.ok() || !(r.loss_after < prev) {
            break;
        }
        prev = r.loss_after;
        selected = Some(r.rank);
    }
    selected
}

/// Callback scoring a correction Δθ on held-out data.
pub type TestError<'a> = &'a (dyn Fn(&[f64]) -> Result<f64> + Sync);

/// One basis at the largest rank; every smaller rank uses its leading
/// columns and the matching leading block of a single QR factorization.
/// `opts.rank` is ignored.
pub fn rank_sweep(
    problem: &dyn ResidualProblem,
    theta: &[f64],
    ranks: &[usize],
    opts: &SubspaceOptions,
    test_error: Option<TestError<'_>>,
) -> Result<RankSweep> {
    check_theta(problem, theta, None)?;
    if ranks.is_empty() || ranks[0] == 0 || ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LsrError::Invalid(format!(
            "ranks must be positive and strictly ascending, got {ranks:?}"
        )));
    }
    let start = Instant::now();
    let max_rank = *ranks.last().expect("non-empty");
    let basis = build_subspace(
        problem,
        theta,
        &SubspaceOptions {
            rank: max_rank,
            ..opts.clone()
        },
    )?;
    let lin = problem.linearize(theta)?;
    let f0 = lin.residual();
    if f0.iter().any(|x| !x.is_finite()) {
        return Err(LsrError::NonFinite("residual at θ₀"));
    }
    let m = reduced_matrix(lin.as_ref(), &basis)?;
    let factor = ReducedFactor::new(&m, f0)?;
    let shared = start.elapsed().as_secs_f64();

    let (pd, n, k) = (problem.param_dim(), f0.len(), basis.sketch_width);
    let sketch_rows = super::basis::sketch_dim(problem, opts.source);
    let mut rows = Vec::with_capacity(ranks.len());
    for &r in ranks {
        let t = Instant::now();
        let sub = basis.leading(r);
        let outcome = factor
            .solve_prefix(r)
            .and_then(|(y, kappa)| finish(lin.as_ref(), &sub, y, kappa, t))
            .and_then(|res| {
                let te = test_error.map(|f| f(&res.delta_theta)).transpose()?;
                Ok((res, te))
            });
        let peak = 8 * (2 * pd * k + sketch_rows * k + pd * r + n * r);
        rows.push(match outcome {
            Ok((res, te)) => SweepRow {
                rank: r,
                loss_before: res.loss_before,
                loss_after: res.loss_after,
                test_error: te,
                kappa: res.kappa,
                y_norm: res.y_norm,
                seconds: shared + t.elapsed().as_secs_f64(),
                peak_memory_bytes: peak,
                failure: None,
            },
            Err(e) => SweepRow {
                rank: r,
                loss_before: crate::residual::half_sq_norm(f0),
                loss_after: f64::NAN,
                test_error: None,
                kappa: f64::NAN,
                y_norm: f64::NAN,
                seconds: shared + t.elapsed().as_secs_f64(),
                peak_memory_bytes: peak,
                failure: Some(e.to_string()),
            },
        });
    }
    let selected = monotone_selection(&rows);
    Ok(RankSweep { rows, selected })
}
