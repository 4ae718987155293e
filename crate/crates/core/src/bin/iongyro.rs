use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use iongyro::commands::{cmd_budget, cmd_crystal, cmd_fig, cmd_modes, prepare_output_dir};
use iongyro::constants::PhysicalConstants;
use iongyro::output::{to_json, write_json};
use iongyro::{Error, RunConfig};

/// Penning-trap ion-crystal gyroscope design calculator.
#[derive(Debug, Parser)]
#[command(name = "iongyro", version)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for data files (default: $IONGYRO_OUTPUT_DIR or the working directory).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Print machine-readable JSON instead of the human summary.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the physical constants in use and exit.
    #[arg(long)]
    constants: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form mode frequencies at the configured trap point.
    Modes {
        /// Also write modes.csv into the output directory.
        #[arg(long)]
        csv: bool,
    },
    /// Data files for one figure.
    Fig {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        id: u8,
    },
    /// Sensitivity budget from the ensemble and trap settings.
    Budget,
    /// Relax an N-ion crystal and report its shape.
    Crystal,
    /// Print the resolved configuration.
    Config,
}

fn load_config(cli: &Cli) -> iongyro::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) -> iongyro::Result<()> {
    if json {
        print!("{}", to_json(value)?);
    } else {
        print!("{}", human());
    }
    Ok(())
}

#[derive(Serialize)]
struct ConstantRow {
    name: &'static str,
    value: f64,
    unit: &'static str,
}

fn run(cli: &Cli) -> iongyro::Result<()> {
    if cli.constants {
        let rows: Vec<ConstantRow> = PhysicalConstants::CODATA_2018
            .as_rows()
            .into_iter()
            .map(|(name, value, unit)| ConstantRow { name, value, unit })
            .collect();
        return emit(cli.json, &rows, || {
            rows.iter()
                .map(|r| format!("{:<28} {:<24e} {}\n", r.name, r.value, r.unit))
                .collect()
        });
    }
    let cfg = load_config(cli)?;
    let Some(command) = &cli.command else {
        return Err(Error::InvalidParameter {
            name: "command",
            reason: "no subcommand given; see --help".into(),
        });
    };
    match command {
        Command::Modes { csv } => {
            let dir = if *csv { Some(prepare_output_dir(&cfg)?) } else { None };
            let report = cmd_modes(&cfg, dir.as_deref())?;
            emit(cli.json, &report, || report.summary())
        }
        Command::Fig { id } => {
            let dir = prepare_output_dir(&cfg)?;
            let report = cmd_fig(*id, &cfg, &dir)?;
            emit(cli.json, &report, || report.summary())
        }
        Command::Budget => {
            let report = cmd_budget(&cfg)?;
            write_json(&prepare_output_dir(&cfg)?.join("budget.json"), &report)?;
            emit(cli.json, &report, || report.summary())
        }
        Command::Crystal => {
            let dir = prepare_output_dir(&cfg)?;
            let report = cmd_crystal(&cfg, &dir)?;
            emit(cli.json, &report, || report.summary())
        }
        Command::Config => {
            let text = cfg.to_text();
            let map: std::collections::BTreeMap<_, _> = cfg.entries().into_iter().collect();
            emit(cli.json, &map, || text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NotConverged { report, .. } = &e {
                eprintln!(
                    "best configuration written after {} iterations; max force {:.3e} N",
                    report.iterations, report.max_force_n
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
