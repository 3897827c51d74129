use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rkhslab_cli::report::InvertStatus;
use rkhslab_cli::run::{self, RunError};
use rkhslab_cli::RunConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "rkhslab",
    version,
    about = "Discrete RKHS and integral-transform checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable check and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover F from samples of f = LF on the E grid.
    Invert {
        #[arg(long)]
        config: PathBuf,
        /// CSV with header point,value_re,value_im.
        #[arg(long)]
        data: PathBuf,
        /// Output CSV for F on the T grid.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// PSD validation and the weighted-L2 verdict.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed_env()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| RunError::Output {
        path: path.display().to_string(),
        source: e.into(),
    })
}

fn status_name(s: InvertStatus) -> &'static str {
    match s {
        InvertStatus::Ok => "ok",
        InvertStatus::NotInjective => "not_injective",
        InvertStatus::RangeViolation => "range_violation",
    }
}

fn execute(cli: Cli) -> Result<u8, RunError> {
    match cli.command {
        Command::Verify { config, out } => {
            let report = run::verify(&load(&config)?)?;
            write_json(&out, &report)?;
            for c in report.criteria.iter().filter(|c| !c.passed) {
                eprintln!(
                    "failed: {} (value {:?}, tolerance {:e})",
                    c.name, c.value, c.tolerance
                );
            }
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Invert {
            config,
            data,
            out,
            report,
        } => {
            let outcome = run::invert(&load(&config)?, &data)?;
            if let Some((grid, f)) = &outcome.solution {
                run::write_solution(&out, grid, f)?;
            }
            if let Some(path) = report {
                write_json(&path, &outcome.report)?;
            }
            let r = &outcome.report;
            match r.range_residual {
                Some(res) => println!("status={} range_residual={res:e}", status_name(r.status)),
                None => println!("status={}", status_name(r.status)),
            }
            if let Some(msg) = &r.message {
                eprintln!("error: {msg}");
            }
            Ok(outcome.exit_code as u8)
        }
        Command::Analyze { config, out } => {
            let (report, code) = run::analyze(&load(&config)?)?;
            write_json(&out, &report)?;
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            Ok(code as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
