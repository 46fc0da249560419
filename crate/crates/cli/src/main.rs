//! `optomech-sense` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optomech_sense::{CouplingKind, Error};

#[derive(Debug, Parser)]
#[command(name = "optomech-sense", version, about = "Cavity-optomechanical acoustic sensor toolkit")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration; the bundled paper configuration when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for stochastic commands; replaces `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `dotted.key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::CsvSvg)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[value(name = "csv")]
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Response magnitude versus laser-cavity detuning.
    DetuningSweep {
        #[arg(long, value_parser = parse_kind)]
        kind: Option<CouplingKind>,
        /// Drive frequency (Hz); default `detuning_sweep.drive_frequency`.
        #[arg(long)]
        drive_hz: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Noise budget, NEP spectrum and synthesised noise spectrum.
    NoiseBudget {
        /// Mode name; default `sensor.mode`.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Calibration chain from an S21 sweep to applied pressure and responsivity.
    Calibrate {
        /// Network-analyser export with columns `freq_hz, s21_db`.
        #[arg(long)]
        s21: PathBuf,
        /// Sensor response with columns `freq_hz, response_v`.
        #[arg(long)]
        response: Option<PathBuf>,
    },
    /// Application-level estimates.
    Applications {
        #[command(subcommand)]
        which: AppCommand,
    },
    /// Seeded Langevin simulation with PSD and analytic comparison.
    Simulate {
        /// Overrides `simulation.duration` (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Overrides `simulation.ensemble`.
        #[arg(long)]
        ensemble: Option<usize>,
        /// Number of leading samples written to trace.csv.
        #[arg(long, default_value_t = 100_000)]
        trace_samples: usize,
    },
    /// Re-executes the run recorded in a manifest.toml.
    Rerun { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum AppCommand {
    TraceGas,
    CellVib,
    Cooling,
    Ldr,
    ForceSens,
    Rayleigh,
}

fn parse_kind(s: &str) -> Result<CouplingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// 2 configuration, 3 input data, 4 numerical divergence, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_))
        | Some(Error::InvalidParameter { .. })
        | Some(Error::InvalidGeometry(_))
        | Some(Error::InvalidMode(_)) => 2,
        Some(Error::Data(_))
        | Some(Error::Io(_))
        | Some(Error::Csv(_))
        | Some(Error::InsufficientData(_))
        | Some(Error::GridMismatch(_)) => 3,
        Some(Error::Diverged { .. }) => 4,
        _ => 1,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("OPTOMECH_SENSE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    configure_threads();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    match commands::run(cli, argv[1..].to_vec()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        let code = |e: Error| exit_code(&anyhow::Error::new(e));
        assert_eq!(code(Error::Config("x".into())), 2);
        assert_eq!(code(Error::InvalidMode("x".into())), 2);
        assert_eq!(code(Error::Data("x".into())), 3);
        assert_eq!(code(Error::InsufficientData("x".into())), 3);
        assert_eq!(code(Error::Diverged { time: 1.0, suggested_dt: 1e-9 }), 4);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
        let wrapped = anyhow::Error::new(Error::Diverged { time: 1.0, suggested_dt: 1e-9 }).context("simulating");
        assert_eq!(exit_code(&wrapped), 4);
    }
}
