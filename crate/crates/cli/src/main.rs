use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use output::Failure;

/// Symmetry-reduced constrained minimization on cohomogeneity-one foliations.
#[derive(Debug, Parser)]
#[command(name = "symred", version, about)]
struct Cli {
    /// Directory for output files and run manifests.
    #[arg(long, global = true, env = "SYMRED_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in models.
    Models {
        /// Print a table instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Mean-curvature and leaf-volume asymptotics checks.
    Geometry {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize on the constraint manifold at one ε.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent solves over a strictly increasing list of ε.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a solution for criticality against non-basic directions.
    Verify {
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Leaf grid size per angle.
        #[arg(long, default_value_t = 64)]
        leaf: usize,
        /// Number of random test directions (half pure-leaf, half mixed).
        #[arg(long, default_value_t = 8)]
        dirs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks l(lift(Av f)) = l(f) on seeded random data.
    AverageDemo {
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 33)]
        n_t: usize,
        #[arg(long, default_value_t = 12)]
        leaf: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Built-in model: flat-torus[:n], clifford, latitude[:n].
    #[arg(long)]
    model: Option<String>,
    /// Custom model JSON file.
    #[arg(long, conflicts_with = "model")]
    model_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Energy spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Run configuration JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of quotient grid nodes.
    #[arg(long)]
    grid: Option<usize>,
    /// Random band-limited initial guess with this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Experimental: restrict to zero-mean functions.
    #[arg(long)]
    deflate: bool,
    /// Negative constraint branch (general energies only).
    #[arg(long)]
    negative: bool,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Models { text } => commands::models(text),
        Command::Geometry { model, out } => commands::geometry(&out_dir, &model.into(), out.as_deref()),
        Command::Solve { problem, eps, out } => {
            let cfg = problem.into_config(eps.map(|e| vec![e]))?;
            commands::solve(&out_dir, &cfg, out.as_deref())
        }
        Command::Sweep { problem, eps, workers } => {
            let cfg = problem.into_config((!eps.is_empty()).then_some(eps))?;
            commands::sweep(&out_dir, &cfg, workers)
        }
        Command::Verify { solution, leaf, dirs, seed, out } => {
            commands::verify(&out_dir, &solution, leaf, dirs, seed, out.as_deref())
        }
        Command::AverageDemo { cases, seed, n_t, leaf, out } => {
            commands::average_demo(&out_dir, cases, seed, n_t, leaf, out.as_deref())
        }
    }
}

impl From<ModelArgs> for config::ModelChoice {
    fn from(m: ModelArgs) -> Self {
        config::ModelChoice { model: m.model, model_file: m.model_file }
    }
}

impl ProblemArgs {
    fn into_config(self, epsilons: Option<Vec<f64>>) -> Result<config::RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => config::RunConfig::from_file(path)?,
            None => config::RunConfig::default(),
        };
        let choice: config::ModelChoice = self.model.into();
        if choice.model.is_some() || choice.model_file.is_some() {
            cfg.model = choice.model;
            cfg.model_file = choice.model_file;
        }
        if let Some(path) = self.spec {
            cfg.spec_file = Some(path);
            cfg.spec = None;
        }
        if let Some(e) = epsilons {
            cfg.epsilons = Some(e);
        }
        cfg.grid = self.grid.or(cfg.grid);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.max_iters = self.max_iters.or(cfg.max_iters);
        cfg.grad_tol = self.grad_tol.or(cfg.grad_tol);
        cfg.deflate |= self.deflate;
        cfg.negative |= self.negative;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let failure = Failure::usage(e.to_string().trim_end());
            eprintln!("{}", failure.to_json());
            return ExitCode::from(failure.code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.code as u8)
        }
    }
}
