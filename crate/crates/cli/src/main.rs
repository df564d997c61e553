//! `hypolab`: classification, Levi parametrix and spectral runs from the shell.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{CommandKind, ExperimentConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "hypolab", version, about = "Hypoellipticity numerics")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "HYPOLAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a symbol.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Symbol text, e.g. "xi1^2 + xi1*eta1".
        #[arg(long)]
        symbol: Option<String>,
        /// Good and bad variable counts.
        #[arg(long, value_parser = parse_split)]
        split: Option<hypolab::VariableSplit>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Levi parametrix sweep and decay fits.
    Levi {
        #[command(flatten)]
        common: Common,
        /// Write g_λ rows under `kernels/`.
        #[arg(long)]
        dump_kernels: bool,
    },
    /// Spectral diagonals, fits and the Tauberian comparison.
    Spectral {
        #[command(flatten)]
        common: Common,
    },
    /// Re-run whatever command a config (or provenance file) names.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<hypolab::VariableSplit, String> {
    let (n, m) = s.split_once(',').ok_or("expected n,m")?;
    let n = n.trim().parse().map_err(|e| format!("{e}"))?;
    let m = m.trim().parse().map_err(|e| format!("{e}"))?;
    hypolab::VariableSplit::new(n, m).map_err(|e| e.to_string())
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("hypolab-out"))
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Classify {
            common,
            symbol,
            split,
            json,
        } => {
            let mut cfg = load(&common)?;
            if symbol.is_some() {
                cfg.symbol = symbol;
            }
            if split.is_some() {
                cfg.split = split;
            }
            let out = cfg.out.clone();
            let cfg = cfg.resolve(CommandKind::Classify)?;
            let mut outcome = commands::cmd_classify(&cfg, out.as_deref())?;
            if json {
                let report = hypolab::classify::classify(&cfg.parsed_symbol()?, &cfg.tolerances.classify)?;
                outcome.summary = hypolab::io::stable_json(&report)?;
            }
            Ok(outcome)
        }
        Command::Levi { common, dump_kernels } => {
            let mut cfg = load(&common)?;
            cfg.dump_kernels |= dump_kernels;
            let out = out_dir(&cfg);
            commands::cmd_levi(&cfg.resolve(CommandKind::Levi)?, &out)
        }
        Command::Spectral { common } => {
            let cfg = load(&common)?;
            let out = out_dir(&cfg);
            commands::cmd_spectral(&cfg.resolve(CommandKind::Spectral)?, &out)
        }
        Command::Run { common } => {
            let cfg = load(&common)?;
            let kind = cfg
                .command
                .ok_or_else(|| CliError::Usage("config names no command".into()))?;
            let out = out_dir(&cfg);
            let cfg = cfg.resolve(kind)?;
            match kind {
                CommandKind::Classify => commands::cmd_classify(&cfg, Some(&out)),
                CommandKind::Levi => commands::cmd_levi(&cfg, &out),
                CommandKind::Spectral => commands::cmd_spectral(&cfg, &out),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("hypolab: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(o) => {
            print!("{}", o.summary);
            ExitCode::from(o.exit_code)
        }
        Err(e) => {
            eprintln!("hypolab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
