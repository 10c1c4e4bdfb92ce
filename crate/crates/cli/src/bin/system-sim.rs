//! `system-sim`: multi-seed system campaign, one CSV row per run and seed.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use urllc_cli::{default_workers, finish, parse_seeds};
use urllc_core::config::load_config;
use urllc_core::scenario::{load_bler_table, summarize_system, write_system_csv, SystemRow};
use urllc_core::system::run_system_campaign;
use urllc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "system-sim", version, about = "eMBB/URLLC multiplexing system simulation")]
struct Args {
    /// Preset name or campaign file with a [system] section.
    #[arg(long)]
    config: String,
    /// Overrides the slot count in the config.
    #[arg(long)]
    slots: Option<u64>,
    /// Seed list such as `1-20` or `3,5,9`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn run(a: Args) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut sys = cfg
        .system
        .ok_or_else(|| Error::Config(format!("{}: no [system] section", a.config)))?;
    if let Some(s) = a.slots {
        if s == 0 {
            return Err(Error::Config("--slots must be positive".into()));
        }
        sys.slots = s;
    }
    if let Some(s) = &a.seeds {
        sys.seeds = parse_seeds(s).map_err(Error::Config)?;
    }
    let table = load_bler_table(sys.bler_table.as_deref())?;
    let workers = a.workers.unwrap_or_else(default_workers);
    let mut rows = Vec::new();
    let mut agg = Vec::new();
    for rc in sys.resolved() {
        let seeds = run_system_campaign(&rc, &table, &sys.seeds, sys.slots, workers)?;
        rows.extend(seeds.iter().map(SystemRow::from_seed));
        agg.push(SystemRow::aggregate(&seeds)?);
    }
    let f = std::fs::File::create(&a.out)?;
    write_system_csv(std::io::BufWriter::new(f), &rows)?;
    print!("{}", summarize_system(&agg));
    Ok(())
}

fn main() -> ExitCode {
    finish(run(Args::parse()))
}
