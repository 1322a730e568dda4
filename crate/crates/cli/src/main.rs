//! `fiscal-default`: solve, simulate and summarize the fiscal economy with
//! endogenous default and its risk-free benchmark.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FISCAL_DEFAULT_OUT";

#[derive(Parser, Debug)]
#[command(name = "fiscal-default", version, about)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: $FISCAL_DEFAULT_OUT, then the config's
    /// output.dir, then ./out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Configuration overrides, e.g. `economy.offers.lambda=0.2`.
    #[arg(value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct Stored {
    /// Stored solution of the economy with default, instead of solving.
    #[arg(long, value_name = "PATH")]
    ed: Option<PathBuf>,
    /// Stored solution of the risk-free economy, instead of solving.
    #[arg(long, value_name = "PATH")]
    amss: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the economy with default; writes the solution bundle and tables.
    Solve(Overrides),
    /// Solve the risk-free benchmark.
    SolveAmss(Overrides),
    /// Simulate one replication of both economies.
    Simulate {
        #[command(flatten)]
        stored: Stored,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte Carlo moments, histograms and the tax/spread scatter data.
    Moments {
        #[command(flatten)]
        stored: Stored,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Impulse responses along a deterministic spending path.
    Irf {
        #[command(flatten)]
        stored: Stored,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Default-episode windows and the no-default counterfactual.
    Episodes {
        #[command(flatten)]
        stored: Stored,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Renegotiation statistics across offer probabilities.
    RenegTable(Overrides),
    /// Replay a stored solution through the invariant checks.
    Validate {
        /// Solution bundle to check.
        #[arg(long, value_name = "PATH")]
        solution: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let overrides = match &cli.command {
        Command::Solve(o) | Command::SolveAmss(o) | Command::RenegTable(o) => o,
        Command::Simulate { overrides, .. }
        | Command::Moments { overrides, .. }
        | Command::Irf { overrides, .. }
        | Command::Episodes { overrides, .. }
        | Command::Validate { overrides, .. } => overrides,
    };
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides.set)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let econ = cfg.check()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config {
                message: "--threads must be positive".into(),
                line: None,
                column: None,
                field: Some("threads".into()),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let out = cli
        .out
        .or_else(|| {
            std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = commands::Context::new(cfg, econ, out)?;
    match cli.command {
        Command::Solve(_) => commands::solve(&ctx),
        Command::SolveAmss(_) => commands::solve_amss(&ctx),
        Command::Simulate { stored, .. } => {
            commands::simulate(&ctx, stored.ed.as_deref(), stored.amss.as_deref())
        }
        Command::Moments { stored, .. } => {
            commands::moments(&ctx, stored.ed.as_deref(), stored.amss.as_deref())
        }
        Command::Irf { stored, .. } => {
            commands::irf(&ctx, stored.ed.as_deref(), stored.amss.as_deref())
        }
        Command::Episodes { stored, .. } => {
            commands::episodes(&ctx, stored.ed.as_deref(), stored.amss.as_deref())
        }
        Command::RenegTable(_) => commands::reneg_table(&ctx),
        Command::Validate { solution, .. } => commands::validate(&ctx, &solution),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
