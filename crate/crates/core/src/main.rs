use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use exwave::experiment::{run, summarize, Experiment, RunConfig};
use exwave::{Error, Result};

#[derive(Parser)]
#[command(name = "exwave", version, about = "Exterior semilinear wave simulator and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve and record energy, potential, sup-norm and conformal series
    Simulate(RunArgs),
    /// Self-convergence against a fine reference grid
    Convergence(RunArgs),
    /// Log-log decay fits on a geometric schedule
    Decay(RunArgs),
    /// Residuals against the linear flow
    Scatter(RunArgs),
    /// Energy identity and divergence checks for a multiplier
    Multiplier(RunArgs),
    /// Boundary flux sign sweep
    Flux(RunArgs),
    /// Spectral calculus checks and critical-norm residuals
    Spectrum(RunArgs),
    /// Pass/fail report over an output directory
    Summarize {
        /// Run directory, or a directory of run directories
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; repeat to run several concurrently
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Override a config key, e.g. `--set grid.h=0.05`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: Option<&Path>, experiment: Experiment, sets: &[String]) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.experiment = experiment;
    config = config.with_overrides(sets)?;
    config.experiment = experiment;
    config.validate()?;
    Ok(config)
}

fn execute(experiment: Experiment, args: RunArgs) -> Result<String> {
    let paths: Vec<Option<&Path>> = if args.config.is_empty() {
        vec![None]
    } else {
        args.config.iter().map(|p| Some(p.as_path())).collect()
    };
    let configs = paths
        .iter()
        .map(|p| {
            load(*p, experiment, &args.sets).map_err(|e| match p {
                Some(p) => Error::ConfigInvalid(format!("{}: {e}", p.display())),
                None => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let root = args
        .out
        .clone()
        .or_else(|| configs[0].output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let dirs: Vec<PathBuf> = if configs.len() == 1 {
        vec![root.clone()]
    } else {
        paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let stem = p
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                root.join(format!("{i:02}-{stem}"))
            })
            .collect()
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(c, d)| run(c, d).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", d.display()))))
            .collect::<Result<Vec<_>>>()
    })?;
    summarize(&root)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => execute(Experiment::Simulate, a),
        Command::Convergence(a) => execute(Experiment::Convergence, a),
        Command::Decay(a) => execute(Experiment::Decay, a),
        Command::Scatter(a) => execute(Experiment::Scatter, a),
        Command::Multiplier(a) => execute(Experiment::Multiplier, a),
        Command::Flux(a) => execute(Experiment::Flux, a),
        Command::Spectrum(a) => execute(Experiment::Spectrum, a),
        Command::Summarize { dir, out } => {
            summarize(&dir.or(out).unwrap_or_else(|| PathBuf::from("out")))
        }
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
