//! Run configuration. Every table rejects unknown keys and every key has a
//! desk-scale default, so a config file only lists what it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lsrkit_core::ilsr::IlsrConfig;
use lsrkit_core::lab::SolverBudgets;
use lsrkit_core::lsr::{SubspaceOptions, SubspaceSource};
use lsrkit_core::net::{Activation, MlpArchitecture};
use lsrkit_core::opt::{AdamConfig, LbfgsConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Regression of sin(πx)·sin(πy) on [−1, 1]².
    #[default]
    Func2d,
    /// Softmax classification of Gaussian blobs in the plane.
    ClassifySynth,
    /// Poisson collocation on [0, 1]² with exact solution sin(4πx²)·sin(πy).
    Poisson,
    /// Viscous Burgers collocation on [−1, 1] × [0, 1].
    Burgers,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Func2d => "func2d",
            ProblemKind::ClassifySynth => "classify_synth",
            ProblemKind::Poisson => "poisson",
            ProblemKind::Burgers => "burgers",
        }
    }

    pub fn is_pde(self) -> bool {
        matches!(self, ProblemKind::Poisson | ProblemKind::Burgers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    #[default]
    Tanh,
    Relu,
    TanhSin,
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Self {
        match a {
            ActivationName::Tanh => Activation::Tanh,
            ActivationName::Relu => Activation::Relu,
            ActivationName::TanhSin => Activation::TanhSin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    #[default]
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceName {
    #[default]
    Output,
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Training samples (func2d, classify_synth).
    pub train: usize,
    /// Held-out samples (func2d, classify_synth).
    pub test: usize,
    pub classes: usize,
    /// Radius of the circle the blob centres sit on.
    pub radius: f64,
    /// Standard deviation of each blob.
    pub spread: f64,
    pub interior: usize,
    /// Dirichlet points (poisson) or periodic pairs (burgers).
    pub boundary: usize,
    /// Initial-time points (burgers).
    pub initial: usize,
    /// Nodes per axis of the reference evaluation grid (pde) and of the mode
    /// grid (all problems).
    pub eval_grid: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            test: 500,
            classes: 4,
            radius: 2.0,
            spread: 0.6,
            interior: 3000,
            boundary: 400,
            initial: 0,
            eval_grid: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: ActivationName,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64; 4],
            activation: ActivationName::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerName,
    /// Adam epochs (mini-batch) or steps (full batch for PDE problems).
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Monitored evaluations without improvement before the rate is halved.
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub lbfgs_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerName::Adam,
            epochs: 200,
            lr: 1e-3,
            batch_size: 32,
            plateau_patience: 10,
            plateau_factor: 0.5,
            lbfgs_steps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsrSection {
    pub rank: usize,
    pub oversample: usize,
    pub precondition: bool,
    pub source: SourceName,
    /// Samples per batch for `--batch`.
    pub batch_size: usize,
    /// Ranks of the rank-sweep experiment, strictly ascending.
    pub ranks: Vec<usize>,
}

impl Default for LsrSection {
    fn default() -> Self {
        Self {
            rank: 400,
            oversample: 10,
            precondition: false,
            source: SourceName::Output,
            batch_size: 256,
            ranks: vec![50, 100, 200, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IlsrSection {
    pub outer_iters: usize,
    pub align_steps: usize,
    pub delta_tau_align: f64,
    pub delta_tau_lsr: f64,
}

impl Default for IlsrSection {
    fn default() -> Self {
        let d = IlsrConfig::default();
        Self {
            outer_iters: d.outer_iters,
            align_steps: d.align_steps,
            delta_tau_align: d.delta_tau_align,
            delta_tau_lsr: d.delta_tau_lsr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Compare solvers on the full parameter space instead of the subspace.
    pub full_space: bool,
    pub adam_steps: usize,
    pub adam_patience: usize,
    pub lbfgs_steps: usize,
    pub krylov_iters: usize,
    /// Basis directions exported by the modes experiment.
    pub mode_indices: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let b = SolverBudgets::default();
        Self {
            full_space: false,
            adam_steps: b.adam.max_steps,
            adam_patience: b.adam.plateau_patience,
            lbfgs_steps: b.lbfgs.max_steps,
            krylov_iters: b.krylov_iters,
            mode_indices: vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Training data or collocation points; func2d test data uses data + 1.
    pub data: u64,
    pub init: u64,
    /// Mini-batch order.
    pub shuffle: u64,
    pub sketch: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            data: 1,
            init: 3,
            shuffle: 4,
            sketch: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub lsr: LsrSection,
    pub ilsr: IlsrSection,
    pub experiment: ExperimentConfig,
    pub seeds: Seeds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Func2d,
            out_dir: PathBuf::from("runs"),
            data: DataConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            lsr: LsrSection::default(),
            ilsr: IlsrSection::default(),
            experiment: ExperimentConfig::default(),
            seeds: Seeds::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        match self.problem {
            ProblemKind::Func2d | ProblemKind::ClassifySynth if d.train == 0 => {
                return Err(invalid("data.train must be at least 1"));
            }
            ProblemKind::ClassifySynth if d.classes < 2 => return Err(invalid("data.classes must be at least 2")),
            ProblemKind::Poisson | ProblemKind::Burgers if d.interior == 0 => {
                return Err(invalid("data.interior must be at least 1"));
            }
            ProblemKind::Burgers if d.initial == 0 => return Err(invalid("burgers needs data.initial >= 1")),
            ProblemKind::Poisson if d.initial != 0 => return Err(invalid("poisson takes no initial points")),
            _ => {}
        }
        if !(d.radius.is_finite() && d.spread > 0.0 && d.spread.is_finite()) {
            return Err(invalid("data.radius must be finite and data.spread positive"));
        }
        if d.eval_grid < 2 {
            return Err(invalid("data.eval_grid must be at least 2"));
        }
        self.architecture()?;
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) || t.batch_size == 0 {
            return Err(invalid("train.lr must be positive and train.batch_size at least 1"));
        }
        if !(t.plateau_factor > 0.0 && t.plateau_factor <= 1.0) {
            return Err(invalid("train.plateau_factor must lie in (0, 1]"));
        }
        let l = &self.lsr;
        if l.rank == 0 || l.batch_size == 0 {
            return Err(invalid("lsr.rank and lsr.batch_size must be at least 1"));
        }
        if l.ranks.is_empty() || l.ranks[0] == 0 || l.ranks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "lsr.ranks must be positive and strictly ascending, got {:?}",
                l.ranks
            )));
        }
        self.ilsr_config()
            .validate()
            .map_err(|e| invalid(format!("[ilsr] {e}")))?;
        Ok(())
    }

    pub fn architecture(&self) -> Result<MlpArchitecture> {
        let out = match self.problem {
            ProblemKind::ClassifySynth => self.data.classes,
            _ => 1,
        };
        let arch = MlpArchitecture::new(2, out, self.net.hidden.clone(), self.net.activation.into())
            .map_err(|e| invalid(format!("[net] {e}")))?;
        if self.problem.is_pde() && !arch.activation.twice_differentiable() {
            return Err(invalid(format!(
                "[net] {} problems need a twice-differentiable activation, not {}",
                self.problem.name(),
                arch.activation.name()
            )));
        }
        Ok(arch)
    }

    pub fn subspace_options(&self) -> SubspaceOptions {
        SubspaceOptions {
            oversample: self.lsr.oversample,
            seed: self.seeds.sketch,
            source: match self.lsr.source {
                SourceName::Output => SubspaceSource::Output,
                SourceName::Residual => SubspaceSource::Residual,
            },
            precondition: self.lsr.precondition,
            ..SubspaceOptions::new(self.lsr.rank)
        }
    }

    pub fn ilsr_config(&self) -> IlsrConfig {
        IlsrConfig {
            outer_iters: self.ilsr.outer_iters,
            align_steps: self.ilsr.align_steps,
            delta_tau_align: self.ilsr.delta_tau_align,
            delta_tau_lsr: self.ilsr.delta_tau_lsr,
            rank: self.lsr.rank,
            oversample: self.lsr.oversample,
            seed: self.seeds.sketch,
        }
    }

    pub fn solver_budgets(&self) -> SolverBudgets {
        let d = SolverBudgets::default();
        let e = &self.experiment;
        SolverBudgets {
            adam: AdamConfig {
                max_steps: e.adam_steps,
                plateau_patience: e.adam_patience,
                ..d.adam
            },
            lbfgs: LbfgsConfig {
                max_steps: e.lbfgs_steps,
                ..d.lbfgs
            },
            krylov_iters: e.krylov_iters,
            ..d
        }
    }
}
