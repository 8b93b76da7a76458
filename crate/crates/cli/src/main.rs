//! Command-line driver: response tables, resonance fits, emitter runs and
//! index calibration.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RepresentationChoice};
use error::CliError;

#[derive(Parser)]
#[command(name = "cavity-modes", version, about = "Multilayer-mirror cavity: response, resonance fits and single-photon emission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file; unset fields take defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    representation: Option<RepresentationChoice>,
    /// Sweep values, e.g. `N=2..12` or `ellc=1,1.75,2`; may be repeated
    #[arg(long, global = true)]
    sweep: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write response.csv: T over a frequency range and the fitted Lorentzians
    Response,
    /// Write fits.csv: resonance parameters over the N x ell_c sweep
    Fit,
    /// Run the emitter dynamics; writes populations, spectrum, spatial and summary files
    Simulate,
    /// Find the dense-layer index that gives the target effective reflectivity
    CalibrateIndex,
}

fn thread_pool() -> Result<(), CliError> {
    let Ok(value) = std::env::var("CAVITY_MODES_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("CAVITY_MODES_THREADS", format!("expected a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("CAVITY_MODES_THREADS", e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    thread_pool()?;
    let mut ov = Overrides { out: cli.out, representation: cli.representation, ..Overrides::default() };
    for s in &cli.sweep {
        config::parse_sweep(s, &mut ov)?;
    }
    let file = match &cli.config {
        Some(path) => config::read_file(path)?,
        None => config::FileConfig::default(),
    };
    let cfg = config::resolve(file, ov)?;
    let written = match cli.command {
        Command::Response => commands::cmd_response(&cfg)?,
        Command::Fit => commands::cmd_fit(&cfg)?,
        Command::Simulate => commands::cmd_simulate(&cfg)?,
        Command::CalibrateIndex => commands::cmd_calibrate(&cfg)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
