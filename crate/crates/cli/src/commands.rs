use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lsrkit_core::ilsr::ilsr_run;
use lsrkit_core::lab::{
    compare_solvers, default_alphas, direction_scan, scalar_demo, stationarity_probe, subspace_modes, LinearizedProblem,
};
use lsrkit_core::lsr::{build_subspace, lsr_csv, one_shot_lsr, rank_sweep, LsrError};
use lsrkit_core::net::init_params;
use lsrkit_core::opt::fmt_f64;
use lsrkit_core::residual::mse;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{read_checkpoint, RunOutput};
use crate::task::Task;

pub const CHECKPOINT_FILE: &str = "model.ckpt";

pub const EXPERIMENTS: [&str; 6] = [
    "compare-solvers",
    "direction-scan",
    "stationarity",
    "scalar-demo",
    "rank-sweep",
    "modes",
];

/// Command-line flags layered over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub checkpoint: Option<PathBuf>,
    pub rank: Option<usize>,
    pub batch: bool,
    pub precondition: bool,
    pub out: Option<PathBuf>,
    /// Replaces the init seed for `train` and the sketch seed otherwise.
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig, command: &str) -> Result<()> {
        if let Some(r) = self.rank {
            cfg.lsr.rank = r;
        }
        if self.precondition {
            cfg.lsr.precondition = true;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(s) = self.seed {
            if command == "train" {
                cfg.seeds.init = s;
            } else {
                cfg.seeds.sketch = s;
            }
        }
        cfg.validate()
    }
}

/// What a command produced: its output directory and a human-readable
/// summary for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub out_dir: PathBuf,
    pub summary: String,
}

/// θ from a checkpoint (which must match the configured architecture) or
/// the seeded initialization.
pub fn initial_theta(cfg: &RunConfig, task: &Task, checkpoint: Option<&Path>) -> Result<Vec<f64>> {
    let arch = task.architecture();
    match checkpoint {
        Some(path) => {
            let (found, theta) = read_checkpoint(path)?;
            if &found != arch {
                return Err(CliError::Config(format!(
                    "{} holds a {:?} network but the config describes {:?}",
                    path.display(),
                    found,
                    arch
                )));
            }
            Ok(theta)
        }
        None => Ok(init_params(arch, cfg.seeds.init)),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn cmd_train(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let task = Task::build(cfg)?;
    let theta0 = initial_theta(cfg, &task, ov.checkpoint.as_deref())?;
    let mut out = RunOutput::create(&cfg.out_dir, "train")?;
    let (theta, trace) = task.train(&theta0, cfg)?;
    out.write_checkpoint(CHECKPOINT_FILE, task.architecture(), &theta)?;
    out.write("train_trace.csv", trace.to_csv().as_bytes())?;
    let f = task.problem().residual_at(&theta)?;
    let test = task.test_error(&theta, None)?;
    out.write(
        "train_metrics.csv",
        format!(
            "loss,train_mse,{}\n{},{},{}\n",
            task.metric(),
            fmt_f64(0.5 * f.iter().map(|v| v * v).sum::<f64>()),
            fmt_f64(mse(&f)),
            cell(test)
        )
        .as_bytes(),
    )?;
    let summary = format!(
        "trained {} for {} records: loss {:e}, train mse {:e}, {} {}",
        cfg.problem.name(),
        trace.records.len(),
        0.5 * f.iter().map(|v| v * v).sum::<f64>(),
        mse(&f),
        task.metric(),
        test.map_or("n/a".into(), |v| format!("{v:e}"))
    );
    let out_dir = out.dir().to_path_buf();
    out.finish(cfg, ov.checkpoint.as_deref())?;
    Ok(Report { out_dir, summary })
}

/// One-shot (or batched) LSR. Artifacts are written either way; the
/// command fails with a numerical error unless the loss strictly drops.
pub fn cmd_lsr(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let task = Task::build(cfg)?;
    let theta = initial_theta(cfg, &task, ov.checkpoint.as_deref())?;
    let mut out = RunOutput::create(&cfg.out_dir, "lsr")?;
    let opts = cfg.subspace_options();
    let res = if ov.batch {
        task.batch_lsr(&theta, &opts, cfg.lsr.batch_size)?
    } else {
        let basis = build_subspace(task.problem(), &theta, &opts)?;
        one_shot_lsr(task.problem(), &theta, &basis)?
    };
    let before = task.test_error(&theta, None)?;
    let after = task.test_error(&theta, Some(&res.delta_theta))?;
    out.write("lsr.csv", lsr_csv(&[res.row(before, after)]).as_bytes())?;
    out.write_vector("delta_theta.vec", &res.delta_theta)?;
    out.write_vector("q_lsr.vec", &res.q_lsr)?;
    out.write_vector("eval_prediction.vec", &task.predict(&theta, Some(&res.delta_theta))?)?;
    let summary = format!(
        "LSR rank {}: loss {:e} -> {:e}, {} {} -> {}, kappa {:e}, |y| {:e}",
        res.rank,
        res.loss_before,
        res.loss_after,
        task.metric(),
        before.map_or("n/a".into(), |v| format!("{v:e}")),
        after.map_or("n/a".into(), |v| format!("{v:e}")),
        res.kappa,
        res.y_norm
    );
    let out_dir = out.dir().to_path_buf();
    out.finish(cfg, ov.checkpoint.as_deref())?;
    if res.loss_after < res.loss_before {
        Ok(Report { out_dir, summary })
    } else {
        Err(CliError::Numerical(format!("LSR did not reduce the loss ({summary})")))
    }
}

pub fn cmd_ilsr(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let task = Task::build(cfg)?;
    let Task::Pde { problem, reference } = &task else {
        return Err(CliError::Config(format!(
            "ilsr needs a PDE problem (poisson or burgers), not {}",
            cfg.problem.name()
        )));
    };
    let theta = initial_theta(cfg, &task, ov.checkpoint.as_deref())?;
    let mut out = RunOutput::create(&cfg.out_dir, "ilsr")?;
    let outcome = ilsr_run(problem, &theta, &cfg.ilsr_config(), Some(reference))?;
    let arch = task.architecture();
    out.write("ilsr_trace.csv", outcome.trace.to_csv().as_bytes())?;
    out.write_checkpoint("ilsr_final.ckpt", arch, &outcome.theta_final)?;
    out.write_checkpoint("ilsr_lsr_base.ckpt", arch, &outcome.theta_lsr)?;
    out.write_vector("ilsr_delta_theta.vec", &outcome.last.delta_theta)?;
    out.write_vector("eval_prediction.vec", &outcome.predict(problem, &reference.points)?)?;
    let last = outcome
        .trace
        .rows
        .iter()
        .rev()
        .find(|r| r.stage == lsrkit_core::ilsr::Stage::Lsr);
    let summary = format!(
        "I-LSR {} outer iterations on {}: final LSR loss {:e}, rel L2 error {}",
        cfg.ilsr.outer_iters,
        cfg.problem.name(),
        outcome.last.loss_after,
        last.and_then(|r| r.rel_l2_error)
            .map_or("n/a".into(), |v| format!("{v:e}"))
    );
    let out_dir = out.dir().to_path_buf();
    out.finish(cfg, ov.checkpoint.as_deref())?;
    Ok(Report { out_dir, summary })
}

pub fn cmd_experiment(name: &str, cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    if !EXPERIMENTS.contains(&name) {
        return Err(CliError::Config(format!(
            "unknown experiment {name:?}; valid names: {}",
            EXPERIMENTS.join(", ")
        )));
    }
    let mut out = RunOutput::create(&cfg.out_dir, &format!("experiment {name}"))?;
    let summary = if name == "scalar-demo" {
        let report = scalar_demo()?;
        out.write("scalar-demo.csv", report.to_csv().as_bytes())?;
        report.summary()
    } else {
        let task = Task::build(cfg)?;
        let theta = initial_theta(cfg, &task, ov.checkpoint.as_deref())?;
        run_experiment(name, cfg, &task, &theta, &mut out)?
    };
    let out_dir = out.dir().to_path_buf();
    out.finish(cfg, ov.checkpoint.as_deref())?;
    Ok(Report { out_dir, summary })
}

fn run_experiment(name: &str, cfg: &RunConfig, task: &Task, theta: &[f64], out: &mut RunOutput) -> Result<String> {
    let problem = task.problem();
    let opts = cfg.subspace_options();
    Ok(match name {
        "compare-solvers" => {
            let lp = if cfg.experiment.full_space {
                LinearizedProblem::full(problem, theta)?
            } else {
                let basis = build_subspace(problem, theta, &opts)?;
                LinearizedProblem::reduced(problem, theta, &basis)?
            };
            let cmp = compare_solvers(&lp, &cfg.solver_budgets());
            out.write("compare-solvers.csv", cmp.summary_csv().as_bytes())?;
            out.write("compare-solvers-trace.csv", cmp.trace_csv().as_bytes())?;
            cmp.summary_csv()
        }
        "direction-scan" => {
            let basis = build_subspace(problem, theta, &opts)?;
            let res = one_shot_lsr(problem, theta, &basis)?;
            let scan = direction_scan(problem, theta, &res.delta_theta, &default_alphas())?;
            out.write("direction-scan.csv", scan.to_csv().as_bytes())?;
            format!(
                "direction scan over {} steps; LSR loss_after {:e}",
                scan.rows.len(),
                res.loss_after
            )
        }
        "stationarity" => {
            let r = stationarity_probe(problem, theta, &opts)?;
            let csv = format!(
                "grad_norm,residual_norm,jacobian_scale,correction_norm,loss_before,loss_after,relative_correction,relative_gradient\n{},{},{},{},{},{},{},{}\n",
                fmt_f64(r.grad_norm),
                fmt_f64(r.residual_norm),
                fmt_f64(r.jacobian_scale),
                fmt_f64(r.correction_norm),
                fmt_f64(r.loss_before),
                fmt_f64(r.loss_after),
                fmt_f64(r.relative_correction()),
                fmt_f64(r.relative_gradient())
            );
            out.write("stationarity.csv", csv.as_bytes())?;
            format!(
                "relative gradient {:e}, relative correction {:e}",
                r.relative_gradient(),
                r.relative_correction()
            )
        }
        "rank-sweep" => {
            let eval = |d: &[f64]| {
                task.test_error(theta, Some(d))
                    .map(|e| e.unwrap_or(f64::NAN))
                    .map_err(|e| LsrError::Invalid(e.to_string()))
            };
            let sweep = rank_sweep(problem, theta, &cfg.lsr.ranks, &opts, Some(&eval))?;
            out.write("rank-sweep.csv", sweep.to_csv().as_bytes())?;
            format!(
                "{} ranks swept; monotone selection {}",
                sweep.rows.len(),
                sweep.selected.map_or("none".into(), |r| r.to_string())
            )
        }
        "modes" => {
            let basis = build_subspace(problem, theta, &opts)?;
            let grid = task.mode_grid(cfg);
            let indices = &cfg.experiment.mode_indices;
            let modes = subspace_modes(task.architecture(), theta, &basis, &grid, indices)?;
            let mut csv = String::from("x0,x1");
            for i in indices {
                let _ = write!(csv, ",mode_{i}");
            }
            csv.push('\n');
            for p in 0..grid.rows() {
                let _ = write!(csv, "{},{}", fmt_f64(grid.get(p, 0)), fmt_f64(grid.get(p, 1)));
                // one output column per mode; multi-output nets report output 0
                let width = task.architecture().output_dim;
                for m in &modes {
                    let _ = write!(csv, ",{}", fmt_f64(m[p * width]));
                }
                csv.push('\n');
            }
            out.write("modes.csv", csv.as_bytes())?;
            format!("{} modes on {} grid points", modes.len(), grid.rows())
        }
        _ => unreachable!("checked against EXPERIMENTS"),
    })
}
