//! Problem construction and the per-problem pieces commands need: the
//! residual problem, held-out evaluation, training, and batched LSR.

use lsrkit_core::ilsr::Reference;
use lsrkit_core::lab::{func2d_dataset, gaussian_blobs, split_rows};
use lsrkit_core::linalg::DenseMatrix;
use lsrkit_core::lsr::{batch_lsr, lsr_predict_at, LsrResult, SubspaceOptions};
use lsrkit_core::net::MlpArchitecture;
use lsrkit_core::opt::{
    adam_minimize, lbfgs_minimize, AdamConfig, Batching, LbfgsConfig, Objective, OptTrace, ResidualObjective,
    SampledObjective,
};
use lsrkit_core::residual::{
    accuracy, burgers_residual, classification_residual, mse, poisson_exact, poisson_residual, poisson_source,
    sample_collocation, supervised_residual, ClassificationProblem, CrankNicolson, Domain, PdeProblem, ResidualProblem,
    SupervisedProblem, BURGERS_NU,
};

use crate::config::{OptimizerName, ProblemKind, RunConfig};
use crate::error::{CliError, Result};

/// Burgers reference lattice: 4096 cells and 1000 Crank–Nicolson steps.
const BURGERS_CELLS: usize = 4096;
const BURGERS_STEPS: usize = 1000;

pub enum Task {
    Regression {
        train: SupervisedProblem,
        test_x: DenseMatrix,
        test_y: DenseMatrix,
    },
    Classification {
        train: ClassificationProblem,
        test_x: DenseMatrix,
        test_labels: Vec<usize>,
    },
    Pde {
        problem: PdeProblem,
        reference: Reference,
    },
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Task {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let arch = cfg.architecture()?;
        let d = &cfg.data;
        let seed = cfg.seeds.data;
        let g = d.eval_grid;
        Ok(match cfg.problem {
            ProblemKind::Func2d => {
                let (x, y) = func2d_dataset(d.train, seed);
                let (test_x, test_y) = func2d_dataset(d.test, seed.wrapping_add(1));
                Task::Regression {
                    train: supervised_residual(&arch, &x, &y).map_err(config_err)?,
                    test_x,
                    test_y,
                }
            }
            ProblemKind::ClassifySynth => {
                let (x, labels) = gaussian_blobs(d.train + d.test, d.classes, d.radius, d.spread, seed);
                let (x_train, test_x) = split_rows(&x, d.train);
                let test_labels = labels[d.train..].to_vec();
                Task::Classification {
                    train: classification_residual(&arch, &x_train, &labels[..d.train], d.classes)
                        .map_err(config_err)?,
                    test_x,
                    test_labels,
                }
            }
            ProblemKind::Poisson => {
                let dom = Domain::Rectangle {
                    lo: [0.0, 0.0],
                    hi: [1.0, 1.0],
                };
                let coll = sample_collocation(&dom, d.interior, d.boundary, 0, seed).map_err(config_err)?;
                let problem = poisson_residual(&arch, &coll, &poisson_source, &|_, _| 0.0).map_err(config_err)?;
                let reference = Reference::grid([0.0, 0.0], [1.0, 1.0], g, g, &poisson_exact);
                Task::Pde { problem, reference }
            }
            ProblemKind::Burgers => {
                let dom = Domain::PeriodicStrip {
                    x: [-1.0, 1.0],
                    t: [0.0, 1.0],
                };
                let coll = sample_collocation(&dom, d.interior, d.boundary, d.initial, seed).map_err(config_err)?;
                let problem = burgers_residual(&arch, &coll, BURGERS_NU).map_err(config_err)?;
                let solution = CrankNicolson {
                    nx: BURGERS_CELLS,
                    nt: BURGERS_STEPS,
                    t_end: 1.0,
                    nu: BURGERS_NU,
                }
                .solve();
                let reference = Reference::grid([-1.0, 0.0], [1.0, 1.0], g, g, &|x, t| solution.value(x, t));
                Task::Pde { problem, reference }
            }
        })
    }

    pub fn problem(&self) -> &dyn ResidualProblem {
        match self {
            Task::Regression { train, .. } => train,
            Task::Classification { train, .. } => train,
            Task::Pde { problem, .. } => problem,
        }
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        match self {
            Task::Regression { train, .. } => train.architecture(),
            Task::Classification { train, .. } => train.architecture(),
            Task::Pde { problem, .. } => problem.architecture(),
        }
    }

    /// Name of the held-out metric reported by [`Task::test_error`].
    pub fn metric(&self) -> &'static str {
        match self {
            Task::Regression { .. } => "test_mse",
            Task::Classification { .. } => "test_error_rate",
            Task::Pde { .. } => "rel_l2_error",
        }
    }

    /// Inputs the held-out metric is evaluated on.
    pub fn eval_points(&self) -> &DenseMatrix {
        match self {
            Task::Regression { test_x, .. } => test_x,
            Task::Classification { test_x, .. } => test_x,
            Task::Pde { reference, .. } => &reference.points,
        }
    }

    /// Refined predictor `q(x; θ) + J(x)·Δθ` on [`Task::eval_points`],
    /// sample-major.
    pub fn predict(&self, theta: &[f64], delta_theta: Option<&[f64]>) -> Result<Vec<f64>> {
        let zero;
        let delta = match delta_theta {
            Some(d) => d,
            None => {
                zero = vec![0.0; theta.len()];
                &zero
            }
        };
        Ok(lsr_predict_at(self.architecture(), theta, delta, self.eval_points())?.into_vec())
    }

    /// Held-out error of the refined predictor: test MSE, test error rate
    /// (1 − accuracy), or relative L2 error against the reference field.
    /// `None` when there is no held-out data.
    pub fn test_error(&self, theta: &[f64], delta_theta: Option<&[f64]>) -> Result<Option<f64>> {
        if self.eval_points().rows() == 0 {
            return Ok(None);
        }
        let pred = self.predict(theta, delta_theta)?;
        Ok(Some(match self {
            Task::Regression { test_y, .. } => {
                let e: Vec<f64> = pred.iter().zip(test_y.as_slice()).map(|(p, t)| p - t).collect();
                mse(&e)
            }
            Task::Classification { train, test_labels, .. } => 1.0 - accuracy(&pred, test_labels, train.num_classes()),
            Task::Pde { reference, .. } => reference.error(&pred)?,
        }))
    }

    /// Grid for mode plots: the reference grid for PDEs, otherwise a square
    /// grid covering the data.
    pub fn mode_grid(&self, cfg: &RunConfig) -> DenseMatrix {
        let half = match self {
            Task::Pde { reference, .. } => return reference.points.clone(),
            Task::Regression { .. } => 1.0,
            Task::Classification { .. } => cfg.data.radius.abs() + 3.0 * cfg.data.spread,
        };
        let g = cfg.data.eval_grid;
        Reference::grid([-half, -half], [half, half], g, g, &|_, _| 0.0).points
    }

    pub fn train(&self, theta: &[f64], cfg: &RunConfig) -> Result<(Vec<f64>, OptTrace)> {
        let t = &cfg.train;
        if t.optimizer == OptimizerName::Lbfgs {
            let lbfgs = LbfgsConfig {
                max_steps: t.lbfgs_steps,
                ..LbfgsConfig::default()
            };
            return Ok(lbfgs_minimize(&ResidualObjective(self.problem()), theta, &lbfgs)?);
        }
        let adam = |max_steps| AdamConfig {
            lr: t.lr,
            max_steps,
            plateau_patience: t.plateau_patience,
            plateau_factor: t.plateau_factor,
            ..AdamConfig::default()
        };
        let batching = Batching::MiniBatch {
            size: t.batch_size,
            seed: cfg.seeds.shuffle,
        };
        let steps = |n: usize| t.epochs * n.div_ceil(t.batch_size);
        let run = |obj: &dyn Objective, n: usize| adam_minimize(obj, theta, &adam(steps(n)), batching);
        Ok(match self {
            Task::Regression { train, .. } => run(&SampledObjective(train), train.inputs().rows())?,
            Task::Classification { train, .. } => run(&SampledObjective(train), train.inputs().rows())?,
            // collocation losses are full-batch; one epoch is one step
            Task::Pde { problem, .. } => {
                adam_minimize(&ResidualObjective(problem), theta, &adam(t.epochs), Batching::Full)?
            }
        })
    }

    pub fn batch_lsr(&self, theta: &[f64], opts: &SubspaceOptions, batch_size: usize) -> Result<LsrResult> {
        Ok(match self {
            Task::Regression { train, .. } => batch_lsr(train, theta, opts, batch_size)?,
            Task::Classification { train, .. } => batch_lsr(train, theta, opts, batch_size)?,
            Task::Pde { .. } => {
                return Err(CliError::Config(
                    "--batch needs a sample-structured problem (func2d or classify_synth)".into(),
                ))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(problem: ProblemKind) -> RunConfig {
        let mut cfg = RunConfig {
            problem,
            ..RunConfig::default()
        };
        cfg.net.hidden = vec![6];
        cfg.data.train = 40;
        cfg.data.test = 10;
        cfg.data.interior = 30;
        cfg.data.boundary = 12;
        cfg.data.initial = if problem == ProblemKind::Burgers { 10 } else { 0 };
        cfg.data.eval_grid = 5;
        cfg
    }

    #[test]
    fn builds_every_problem() {
        for kind in [
            ProblemKind::Func2d,
            ProblemKind::ClassifySynth,
            ProblemKind::Poisson,
            ProblemKind::Burgers,
        ] {
            let cfg = small(kind);
            let task = Task::build(&cfg).unwrap();
            let theta = lsrkit_core::net::init_params(task.architecture(), 0);
            let e = task.test_error(&theta, None).unwrap().unwrap();
            assert!(e.is_finite(), "{kind:?}");
            assert_eq!(task.problem().param_dim(), theta.len());
        }
    }

    #[test]
    fn pde_refuses_batching() {
        let cfg = small(ProblemKind::Poisson);
        let task = Task::build(&cfg).unwrap();
        let theta = lsrkit_core::net::init_params(task.architecture(), 0);
        let err = task.batch_lsr(&theta, &SubspaceOptions::new(2), 8).err().unwrap();
        assert_eq!(err.exit_code(), 1);
    }
}
