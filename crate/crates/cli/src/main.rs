use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use su11_cli::commands::{cmd_fit, cmd_fringe, cmd_montecarlo, cmd_sweep, eta_grid, FitOverrides};
use su11_cli::io::write_atomic;
use su11_cli::{CliError, Result, RunConfig};

/// Simulate and analyse unseeded, gain-unbalanced SU(1,1) interferometers.
#[derive(Debug, Parser)]
#[command(name = "su11", version)]
struct Cli {
    /// Flat `key = value` configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid size: phase points (fringe), η points (sweep) or scan positions (montecarlo).
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean output, noise and phase sensitivity over one fringe period.
    Fringe,
    /// Best phase sensitivity relative to the shot-noise limit versus detection efficiency.
    Sweep,
    /// Pulse-ensemble fringe scan with pump post-selection.
    Montecarlo {
        /// JSON summary file; defaults to `<out>.json`, or standard error without `--out`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fit a fringe or scan CSV and extract gains.
    Fit {
        /// CSV emitted by `fringe` or `montecarlo`, or measured data in the same schema.
        csv: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long = "n-inside")]
        n_inside: Option<f64>,
        /// Photons from the second crystal alone; enables exact gain extraction.
        #[arg(long)]
        n2: Option<f64>,
    },
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from));
    match cli.command {
        Command::Fringe => {
            let csv = cmd_fringe(&cfg, cli.grid.unwrap_or(cfg.fringe_points))?;
            emit(out.as_deref(), &csv)
        }
        Command::Sweep => {
            let etas = cli.grid.map(eta_grid).unwrap_or_else(|| cfg.eta_grid.clone());
            let csv = cmd_sweep(&cfg, &etas)?;
            emit(out.as_deref(), &csv)
        }
        Command::Montecarlo { summary } => {
            let result = cmd_montecarlo(&cfg, cli.grid.unwrap_or(cfg.scan_points))?;
            emit(out.as_deref(), &result.csv)?;
            let summary_path = summary
                .or_else(|| cfg.summary.clone().map(PathBuf::from))
                .or_else(|| out.as_ref().map(|p| p.with_extension("json")));
            match summary_path {
                Some(p) => write_atomic(&p, &result.summary_json()),
                None => {
                    eprint!("{}", result.summary_json());
                    Ok(())
                }
            }
        }
        Command::Fit {
            csv,
            eta,
            mu,
            n_inside,
            n2,
        } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", csv.display())))?;
            let report = cmd_fit(&cfg, &text, FitOverrides { eta, mu, n_inside, n2 })?;
            emit(out.as_deref(), &report.to_json())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("su11: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
