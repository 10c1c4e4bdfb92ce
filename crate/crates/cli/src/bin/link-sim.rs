//! `link-sim`: PER-versus-SNR campaign for the short-packet codecs.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use urllc_cli::{default_workers, finish};
use urllc_core::config::load_config;
use urllc_core::link::run_link_campaign;
use urllc_core::scenario::write_per_csv;
use urllc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "link-sim", version, about = "Packet error rate of short-packet codecs")]
struct Args {
    /// Preset name or campaign file with a [link] section.
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn run(a: Args) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut link = cfg
        .link
        .ok_or_else(|| Error::Config(format!("{}: no [link] section", a.config)))?;
    if let Some(s) = a.seed {
        link.seed = s;
    }
    let workers = a.workers.unwrap_or_else(default_workers);
    let curves = link
        .campaigns()
        .iter()
        .map(|c| run_link_campaign(c, workers))
        .collect::<Result<Vec<_>>>()?;
    let f = std::fs::File::create(&a.out)?;
    write_per_csv(std::io::BufWriter::new(f), &curves)?;
    print!("{}", urllc_core::scenario::summarize_per(&curves));
    Ok(())
}

fn main() -> ExitCode {
    finish(run(Args::parse()))
}
