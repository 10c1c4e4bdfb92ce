//! `urllc`: run presets or campaign files, validate configs, calibrate BLER
//! tables and summarize result files.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use urllc_cli::{default_workers, finish};
use urllc_core::config::{load_config, CampaignConfig};
use urllc_core::link::CalibrationConfig;
use urllc_core::scenario::{default_out_dir, report, run_scenario, summarize_per, summarize_system, SystemRow, OUT_DIR_ENV};
use urllc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "urllc", version, about = "URLLC downlink link- and system-level simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a preset (fig4a, fig4b, fig4c) or a campaign file.
    Run {
        config: String,
        /// Output directory [default: $URLLC_OUT_DIR or ./results].
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a preset or campaign file and print every problem found.
    Validate { config: String },
    /// Regenerate the BLER table by Monte Carlo simulation.
    Calibrate {
        /// Campaign file with a [calibration] section; defaults otherwise.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize result CSVs.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn out_dir(o: Option<PathBuf>) -> PathBuf {
    o.unwrap_or_else(default_out_dir)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, out_dir: o, workers } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(o);
            let out = run_scenario(&cfg, &dir, workers.unwrap_or_else(default_workers))?;
            if !out.per_curves.is_empty() {
                print!("{}", summarize_per(&out.per_curves));
            }
            if !out.system.is_empty() {
                let rows: Vec<SystemRow> = out.system.iter().map(|r| r.aggregate.clone()).collect();
                print!("{}", summarize_system(&rows));
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Cmd::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok", cfg.name);
            Ok(())
        }
        Cmd::Calibrate { config, out_dir: o, workers } => {
            let cfg = match config {
                Some(c) => {
                    let mut cfg = load_config(&c)?;
                    if cfg.calibration.is_none() {
                        return Err(Error::Config(format!("{c}: no [calibration] section")));
                    }
                    cfg.link = None;
                    cfg.system = None;
                    cfg
                }
                None => CampaignConfig {
                    name: "calibration".into(),
                    link: None,
                    system: None,
                    calibration: Some(CalibrationConfig::default()),
                },
            };
            let out = run_scenario(&cfg, &out_dir(o), workers.unwrap_or_else(default_workers))?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Cmd::Report { files } => {
            for f in files {
                println!("== {}", f.display());
                print!("{}", report(&f)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Documented in --help via the out_dir flag.
    let _ = OUT_DIR_ENV;
    finish(run(Cli::parse()))
}
