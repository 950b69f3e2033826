use std::fmt::Write as _;
use std::time::Instant;

use super::LinearizedProblem;
use crate::opt::{
    adam_minimize, cgls_solve, fmt_f64, lbfgs_minimize, lsqr_solve, AdamConfig, Batching, KrylovResult, LbfgsConfig,
    LinearOperator, OptTrace,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverBudgets {
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
    pub krylov_iters: usize,
    /// Relative normal-residual tolerance for CGLS and LSQR.
    pub krylov_tol: f64,
}

impl Default for SolverBudgets {
    fn default() -> Self {
        Self {
            adam: AdamConfig {
                max_steps: 100_000,
                plateau_patience: 1000,
                ..Default::default()
            },
            lbfgs: LbfgsConfig {
                max_steps: 2000,
                ..Default::default()
            },
            krylov_iters: 2000,
            krylov_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRow {
    pub solver: &'static str,
    pub iterations: usize,
    /// `½‖K·x − b‖²` evaluated afresh at the returned iterate.
    pub final_loss: f64,
    pub seconds: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverComparison {
    /// adam, lbfgs, cgls, lsqr, then direct.
    pub rows: Vec<SolverRow>,
    /// Per-solver `(iteration, loss)` history.
    pub traces: Vec<(&'static str, Vec<(usize, f64)>)>,
}

impl SolverComparison {
    pub fn row(&self, solver: &str) -> Option<&SolverRow> {
        self.rows.iter().find(|r| r.solver == solver)
    }

    pub fn direct_loss(&self) -> Option<f64> {
        self.row("direct").filter(|r| r.failure.is_none()).map(|r| r.final_loss)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("solver,iterations,final_loss,seconds,status\n");
        for r in &self.rows {
            let status = r
                .failure
                .as_deref()
                .map_or("ok".to_string(), |m| format!("failed: {}", m.replace(',', ";")));
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.solver,
                r.iterations,
                fmt_f64(r.final_loss),
                fmt_f64(r.seconds),
                status
            );
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("solver,iteration,loss\n");
        for (name, trace) in &self.traces {
            for (i, l) in trace {
                let _ = writeln!(s, "{name},{i},{}", fmt_f64(*l));
            }
        }
        s
    }
}

fn opt_trace(t: &OptTrace) -> Vec<(usize, f64)> {
    t.records.iter().map(|r| (r.step, r.loss)).collect()
}

fn krylov_trace(lp: &LinearizedProblem<'_>, k: &KrylovResult) -> Vec<(usize, f64)> {
    let mut out = vec![(0, lp.loss(&vec![0.0; lp.cols()]))];
    out.extend(k.residual_norms.iter().enumerate().map(|(i, r)| (i + 1, 0.5 * r * r)));
    out
}

/// Runs Adam, L-BFGS, CGLS and LSQR from zero on the same linearized
/// problem, then the direct least-squares solve. A failing solver yields a
/// flagged row instead of aborting the comparison.
pub fn compare_solvers(lp: &LinearizedProblem<'_>, budgets: &SolverBudgets) -> SolverComparison {
    let x0 = vec![0.0; lp.cols()];
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut record = |name: &'static str, t: Instant, outcome: Result<(Vec<f64>, usize, Vec<(usize, f64)>), String>| {
        let seconds = t.elapsed().as_secs_f64();
        match outcome {
            Ok((x, iterations, trace)) => {
                rows.push(SolverRow {
                    solver: name,
                    iterations,
                    final_loss: lp.loss(&x),
                    seconds,
                    failure: None,
                });
                traces.push((name, trace));
            }
            Err(msg) => rows.push(SolverRow {
                solver: name,
                iterations: 0,
                final_loss: f64::NAN,
                seconds,
                failure: Some(msg),
            }),
        }
    };

    let t = Instant::now();
    let out = adam_minimize(lp, &x0, &budgets.adam, Batching::Full)
        .map(|(x, tr)| (x, budgets.adam.max_steps, opt_trace(&tr)))
        .map_err(|e| e.to_string());
    record("adam", t, out);

    let t = Instant::now();
    let out = lbfgs_minimize(lp, &x0, &budgets.lbfgs)
        .map(|(x, tr)| {
            let its = tr.records.last().map_or(0, |r| r.step);
            (x, its, opt_trace(&tr))
        })
        .map_err(|e| e.to_string());
    record("lbfgs", t, out);

    let t = Instant::now();
    let out = cgls_solve(lp, lp.rhs(), budgets.krylov_iters, budgets.krylov_tol)
        .map(|k| {
            let tr = krylov_trace(lp, &k);
            (k.x.clone(), k.iterations(), tr)
        })
        .map_err(|e| e.to_string());
    record("cgls", t, out);

    let t = Instant::now();
    let out = lsqr_solve(lp, lp.rhs(), budgets.krylov_iters, budgets.krylov_tol)
        .map(|k| {
            let tr = krylov_trace(lp, &k);
            (k.x.clone(), k.iterations(), tr)
        })
        .map_err(|e| e.to_string());
    record("lsqr", t, out);

    let t = Instant::now();
    let out = lp
        .direct_solve()
        .map(|x| {
            let l = lp.loss(&x);
            (x, 1, vec![(1, l)])
        })
        .map_err(|e| e.to_string());
    record("direct", t, out);

    SolverComparison { rows, traces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_sketch, householder_qr, DenseMatrix};

    /// `U·diag(s)·Wᵀ` with random orthonormal factors.
    fn conditioned(n: usize, s: &[f64], seed: u64) -> DenseMatrix {
        let r = s.len();
        let u = householder_qr(&gaussian_sketch(n, r, seed)).unwrap().q;
        let w = householder_qr(&gaussian_sketch(r, r, seed + 1)).unwrap().q;
        let mut us = u.clone();
        for i in 0..n {
            for j in 0..r {
                us.set(i, j, u.get(i, j) * s[j]);
            }
        }
        us.matmul(&w.transpose()).unwrap()
    }

    fn small_budgets() -> SolverBudgets {
        SolverBudgets {
            adam: AdamConfig {
                lr: 1e-2,
                max_steps: 3000,
                plateau_patience: 100,
                ..Default::default()
            },
            lbfgs: LbfgsConfig {
                max_steps: 200,
                ..Default::default()
            },
            krylov_iters: 200,
            krylov_tol: 1e-15,
        }
    }

    #[test]
    fn well_conditioned_problem_every_solver_matches_direct() {
        let s: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 / 9.0).collect();
        let k = conditioned(60, &s, 3);
        let b = gaussian_sketch(60, 1, 9).into_vec();
        let lp = LinearizedProblem::from_dense(k, b).unwrap();
        let cmp = compare_solvers(&lp, &small_budgets());
        let direct = cmp.direct_loss().unwrap();
        for r in &cmp.rows {
            assert!(r.failure.is_none(), "{r:?}");
            assert!(r.final_loss <= 10.0 * direct, "{r:?} vs {direct}");
            assert!(r.final_loss >= direct * (1.0 - 1e-10), "{r:?} below direct {direct}");
        }
        assert_eq!(cmp.rows.len(), 5);
        assert_eq!(cmp.summary_csv().lines().count(), 6);
    }

    #[test]
    fn ill_conditioned_problem_stalls_iterative_solvers() {
        // Singular values spread over 10 decades and an exactly attainable
        // right-hand side: the direct solve reaches rounding level.
        let s: Vec<f64> = (0..60).map(|i| 10f64.powf(-10.0 * i as f64 / 59.0)).collect();
        let k = conditioned(80, &s, 5);
        let xt = gaussian_sketch(60, 1, 6).into_vec();
        let b = k.matvec(&xt).unwrap();
        let lp = LinearizedProblem::from_dense(k, b).unwrap();
        let mut budgets = small_budgets();
        budgets.krylov_iters = 30;
        budgets.lbfgs.max_steps = 30;
        let cmp = compare_solvers(&lp, &budgets);
        let direct = cmp.direct_loss().unwrap();
        for name in ["adam", "lbfgs", "cgls", "lsqr"] {
            let r = cmp.row(name).unwrap();
            assert!(r.final_loss >= 10.0 * direct, "{r:?} vs {direct}");
        }
    }

    #[test]
    fn traces_start_from_zero_iterate() {
        let k = conditioned(20, &[1.0, 2.0, 3.0], 1);
        let b = gaussian_sketch(20, 1, 2).into_vec();
        let lp = LinearizedProblem::from_dense(k, b).unwrap();
        let l0 = lp.loss(&[0.0; 3]);
        let cmp = compare_solvers(&lp, &small_budgets());
        for (name, tr) in &cmp.traces {
            if *name != "direct" {
                assert_eq!(tr[0], (0, l0), "{name}");
            }
        }
        assert!(cmp.trace_csv().starts_with("solver,iteration,loss\nadam,0,"));
    }
}
