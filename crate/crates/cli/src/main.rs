use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsrkit_cli::io::VERSION;
use lsrkit_cli::{cmd_experiment, cmd_ilsr, cmd_lsr, cmd_train, CliError, Overrides, Report, RunConfig};

#[derive(Parser)]
#[command(name = "lsrkit", version = VERSION, about = "Linearized subspace refinement for MLPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network with Adam or L-BFGS and write a checkpoint.
    Train(Common),
    /// One-shot LSR at a checkpoint (or the seeded initialization).
    Lsr(Common),
    /// Iterative LSR for a PDE problem.
    Ilsr(Common),
    /// Run a named diagnostic experiment.
    Experiment {
        /// compare-solvers, direction-scan, stationarity, scalar-demo, rank-sweep or modes
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Subspace rank override.
    #[arg(long)]
    rank: Option<usize>,
    /// Solve LSR from mini-batch accumulated normal equations.
    #[arg(long)]
    batch: bool,
    /// Column-equilibrate the reduced system before solving.
    #[arg(long)]
    precondition: bool,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Init seed for `train`, sketch seed for the other commands.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self, command: &str) -> Result<(RunConfig, Overrides), CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let ov = Overrides {
            checkpoint: self.checkpoint.clone(),
            rank: self.rank,
            batch: self.batch,
            precondition: self.precondition,
            out: self.out.clone(),
            seed: self.seed,
        };
        ov.apply(&mut cfg, command)?;
        Ok((cfg, ov))
    }
}

fn run(cli: Cli) -> Result<Report, CliError> {
    match cli.command {
        Command::Train(c) => {
            let (cfg, ov) = c.resolve("train")?;
            cmd_train(&cfg, &ov)
        }
        Command::Lsr(c) => {
            let (cfg, ov) = c.resolve("lsr")?;
            cmd_lsr(&cfg, &ov)
        }
        Command::Ilsr(c) => {
            let (cfg, ov) = c.resolve("ilsr")?;
            cmd_ilsr(&cfg, &ov)
        }
        Command::Experiment { name, common } => {
            let (cfg, ov) = common.resolve("experiment")?;
            cmd_experiment(&name, &cfg, &ov)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("LSRKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a pool already built by the runtime is fine to keep
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(report) => {
            println!("{}", report.summary);
            println!("artifacts in {}", report.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lsrkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
