//! `nmcf`: run engines from JSON configs, audit their artifacts and
//! cross-validate engines against each other.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AuditOptions, Check};
use error::CliError;

#[derive(Parser)]
#[command(name = "nmcf", version, about = "Volume-normalized mean curvature flow engines and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine from a config file (or a previous summary.json).
    Run {
        config: PathBuf,
        /// Write artifacts here instead of the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the artifacts of a finished run; writes `<dir>/audit.json`.
    ///
    /// Exit codes: 0 all checks pass, 1 a check fails, 2 missing artifacts,
    /// 3 a check refused because its hypotheses do not hold.
    Audit {
        dir: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "preservation,holder,convergence")]
        checks: Vec<Check>,
        /// Reflection parameter ρ for the preservation check.
        #[arg(long, default_value_t = 0.01)]
        rho: f64,
        /// Terminal residual to the stationary ball accepted by the convergence check.
        #[arg(long, default_value_t = 1e-3)]
        residual_tol: f64,
    },
    /// Run a bundle of configs and tabulate terminal gaps between engines;
    /// exits 0 iff the gaps shrink monotonically under refinement.
    CrossValidate { bundle: PathBuf },
    /// Print the fully-resolved config of a preset.
    Preset { name: config::Preset },
}

impl clap::ValueEnum for config::Preset {
    fn value_variants<'a>() -> &'a [Self] {
        &[config::Preset::StationaryDisk, config::Preset::Cos3Decay]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            config::Preset::StationaryDisk => "stationary-disk",
            config::Preset::Cos3Decay => "cos3-decay",
        }))
    }
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run { config, out } => {
            let s = commands::run(&config, out)?;
            println!(
                "{} run to t = {} in {} steps ({:.2} s): energy {:.10}, residual {:.3e}",
                s.engine, s.terminal_time, s.steps, s.wall_time_s, s.terminal_energy, s.terminal_residual
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit {
            dir,
            checks,
            rho,
            residual_tol,
        } => {
            let outcome = commands::audit(
                &dir,
                &AuditOptions {
                    checks,
                    rho,
                    residual_tol,
                },
            )?;
            for c in &outcome.report.checks {
                let margin = c.margin.map_or("-".to_string(), |m| format!("{m:.3e}"));
                println!("{:<14} {} margin {margin}", c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            if !outcome.refusals.is_empty() {
                return Err(CliError::Refused(outcome.refusals.join("; ")));
            }
            Ok(if outcome.report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::CrossValidate { bundle } => {
            let table = commands::cross(&bundle)?;
            for row in table.rows() {
                println!("level {} {:<28} {:.6e}", row.level, row.pair, row.gap);
            }
            println!(
                "monotone {}, min reduction {:.3}, finest max gap {:.3e}",
                table.monotone, table.min_reduction, table.finest_max_gap
            );
            Ok(if table.monotone {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Preset { name } => {
            let text = serde_json::to_string_pretty(&name.config()).expect("preset serializes");
            println!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
