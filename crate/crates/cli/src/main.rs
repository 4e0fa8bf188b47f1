mod commands;
mod config;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use bearing_gp::locator::ModelVariant;
use bearing_gp::{Error, ErrorKind};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Journal-bearing film fitting and shaft-centre localisation.
#[derive(Debug, Parser)]
#[command(name = "bearing-gp", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Direction of the applied load from TDC, e.g. 30deg; overrides the config.
    #[arg(long, global = true, value_parser = units::angle, allow_hyphen_values = true)]
    load_angle: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one revolution of readings per operating condition.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Trim, fit and extract the shaft location from one observation file.
    FitFilm {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit every run listed in a manifest and write the labelled dataset.
    BuildDataset {
        /// CSV with columns file,speed_rpm,load_N; paths relative to it.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Likelihood map of the shaft centre for a new speed and load.
    Locate {
        #[arg(long)]
        dataset: PathBuf,
        /// e.g. 400rpm or 41.9rad/s
        #[arg(long, value_parser = units::speed)]
        speed: f64,
        /// e.g. 20kN or 20000N
        #[arg(long, value_parser = units::load)]
        load: f64,
        #[arg(long, default_value = "A")]
        model: ModelVariant,
        #[arg(long)]
        out: PathBuf,
        /// Also write map.pgm.
        #[arg(long)]
        pgm: bool,
    },
    /// Leave-one-out cross-validation of both localisation models.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    }
}

fn fail(err: &Error) -> ExitCode {
    let kind = err.kind();
    let msg = err.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", kind_name(kind));
    ExitCode::from(exit_code(kind))
}

fn run(cli: Cli) -> bearing_gp::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(a) = cli.load_angle {
        config.geometry.load_angle_deg = a.to_degrees();
    }
    match cli.command {
        Command::Synth { out } => commands::synth(&config, &out),
        Command::FitFilm { obs, out } => commands::fit_film(&config, &obs, &out),
        Command::BuildDataset { runs, out } => commands::build_dataset(&config, &runs, &out),
        Command::Locate {
            dataset,
            speed,
            load,
            model,
            out,
            pgm,
        } => commands::locate(&config, &dataset, speed, load, model, &out, pgm),
        Command::Validate { dataset, out } => commands::validate(&config, &dataset, &out),
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
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[config]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
