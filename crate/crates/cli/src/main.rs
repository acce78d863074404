mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::AuditParams;
use config::ConfigArgs;

/// Parametric IPDG solves, reduced-basis training and locally conservative
/// reduced fluxes.
#[derive(Debug, Parser)]
#[command(name = "rbflux", version)]
struct Cli {
    /// Worker threads for parallel sweeps
    #[arg(long, global = true, env = "RBFLUX_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full-order solve with VTK output and a conservation report
    FomSolve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Parameter, comma separated
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        mu: Vec<f64>,
        /// Output directory (defaults to the configured one)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence table
    Convergence {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        levels: Vec<usize>,
        /// CSV file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy training of a reduced model
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
        /// Trajectory CSV (defaults next to the model)
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Online solve, estimate and reduced flux for one parameter
    RomSolve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        mu: Vec<f64>,
        /// Also write the lifted solution and flux as VTK
        #[arg(long)]
        lift: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Conservation defects of the naive and the conservative reduced flux
    Audit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "random", required_unless_present = "random")]
        mu: Option<Vec<f64>>,
        /// Number of random parameters to audit
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "audit")]
        out: PathBuf,
    },
    /// Full-order and online timings across grid sizes
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        sizes: Vec<usize>,
        /// Reduced basis size used on every grid
        #[arg(long)]
        n_fixed: usize,
        #[arg(long, default_value_t = 15)]
        repeats: usize,
        /// CSV file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .context("cannot configure worker threads")?;
    }
    match cli.command {
        Command::FomSolve { config, mu, out } => commands::fom_solve(&config.load()?, &mu, out),
        Command::Convergence { config, levels, out } => {
            commands::convergence(&config.load()?, &levels, out)
        }
        Command::Train {
            config,
            out,
            trajectory,
        } => commands::train(&config.load()?, &out, trajectory),
        Command::RomSolve {
            model,
            mu,
            lift,
            out,
        } => commands::rom_solve(&model, &mu, lift, &out),
        Command::Audit {
            model,
            mu,
            random,
            seed,
            out,
        } => {
            let params = match (mu, random) {
                (Some(mu), _) => AuditParams::Single(mu),
                (None, Some(count)) => AuditParams::Random { count, seed },
                (None, None) => unreachable!("clap requires --mu or --random"),
            };
            commands::audit(&model, params, &out)
        }
        Command::Bench {
            config,
            sizes,
            n_fixed,
            repeats,
            out,
        } => commands::bench(&config.load()?, &sizes, n_fixed, repeats, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
