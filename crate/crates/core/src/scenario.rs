//! Campaign execution and versioned result files.
//!
//! Every result CSV starts with a `# schema: <name>/v<k>` comment line so
//! downstream readers can reject files they do not understand.

use crate::channel::BlerTable;
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::link::{calibrate_bler_table, run_link_campaign, PerCurve, PerPoint, RawBlerPoint};
use crate::system::{run_system_campaign, Policy, Scheme, SeedResult};
use crate::latency::LatencyRecorder;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

pub const PER_SCHEMA: &str = "link_per/v1";
pub const SYSTEM_SCHEMA: &str = "system_results/v1";
pub const BLER_RAW_SCHEMA: &str = "bler_raw/v1";

const PER_HEADER: [&str; 6] = ["codec", "snr_db", "trials", "errors", "per", "ci_halfwidth"];
const SYSTEM_HEADER: [&str; 9] = [
    "scheme",
    "policy",
    "seed",
    "embb_throughput_bps",
    "urllc_mean_latency_us",
    "urllc_p99_latency_us",
    "urllc_per",
    "wasted_reserved_fraction",
    "preemption_count",
];

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "URLLC_OUT_DIR";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

fn schema_line(schema: &str) -> String {
    format!("# schema: {schema}\n")
}

/// Reads the schema comment and returns the remaining CSV text.
fn split_schema<R: Read>(r: R, expected: &str) -> Result<String> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let got = first.trim().strip_prefix("# schema:").map(str::trim);
    if got != Some(expected) {
        return Err(Error::Parse(format!("expected schema '{expected}', found '{}'", first.trim())));
    }
    let mut rest = String::new();
    for l in lines {
        rest.push_str(&l?);
        rest.push('\n');
    }
    Ok(rest)
}

/// Schema name of a result file, from its first line.
pub fn detect_schema(path: &Path) -> Result<String> {
    let f = std::fs::File::open(path)?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first)?;
    first
        .trim()
        .strip_prefix("# schema:")
        .map(|s| s.trim().to_string())
        .ok_or_else(|| Error::Parse(format!("{}: missing schema line", path.display())))
}

pub fn write_per_csv<W: Write>(mut w: W, curves: &[PerCurve]) -> Result<()> {
    w.write_all(schema_line(PER_SCHEMA).as_bytes())?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(PER_HEADER)?;
    for curve in curves {
        for p in &curve.points {
            c.write_record([
                curve.codec.clone(),
                p.snr_db.to_string(),
                p.trials.to_string(),
                p.errors.to_string(),
                p.per.to_string(),
                p.ci_halfwidth.to_string(),
            ])?;
        }
    }
    c.flush()?;
    Ok(())
}

pub fn read_per_csv<R: Read>(r: R) -> Result<Vec<PerCurve>> {
    let body = split_schema(r, PER_SCHEMA)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    if rd.headers()?.iter().collect::<Vec<_>>() != PER_HEADER {
        return Err(Error::Parse("unexpected PER header".into()));
    }
    let mut curves: Vec<PerCurve> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| Error::Parse(format!("bad number '{}'", &rec[i]))) };
        let codec = rec[0].to_string();
        let p = PerPoint {
            snr_db: num(1)?,
            trials: num(2)? as u64,
            errors: num(3)? as u64,
            per: num(4)?,
            ci_halfwidth: num(5)?,
            under_sampled: false,
        };
        match curves.iter_mut().find(|c| c.codec == codec) {
            Some(c) => c.points.push(p),
            None => curves.push(PerCurve { codec, points: vec![p] }),
        }
    }
    Ok(curves)
}

/// One line of a system result file; `seed == None` marks an aggregate over
/// all seeds of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRow {
    pub scheme: Scheme,
    pub policy: Policy,
    pub seed: Option<u64>,
    pub embb_throughput_bps: f64,
    pub urllc_mean_latency_us: Option<f64>,
    pub urllc_p99_latency_us: Option<f64>,
    pub urllc_per: Option<f64>,
    pub wasted_reserved_fraction: f64,
    pub preemption_count: u64,
}

impl SystemRow {
    pub fn from_seed(r: &SeedResult) -> Self {
        Self {
            scheme: r.scheme,
            policy: r.policy,
            seed: Some(r.seed),
            embb_throughput_bps: r.embb_throughput_bps(),
            urllc_mean_latency_us: r.latency.mean(),
            urllc_p99_latency_us: r.latency.percentile(0.99),
            urllc_per: r.latency.per(),
            wasted_reserved_fraction: r.wasted_reserved_fraction(),
            preemption_count: r.preemption_count,
        }
    }

    /// Mean throughput over seeds; latency statistics over the pooled packets.
    pub fn aggregate(rs: &[SeedResult]) -> Result<Self> {
        let first = rs.first().ok_or_else(|| Error::Runtime("no seeds to aggregate".into()))?;
        let mut lat = LatencyRecorder::new();
        let (mut reserved, mut wasted, mut pre) = (0u64, 0u64, 0u64);
        for r in rs {
            lat.merge(&r.latency);
            reserved += r.reserved_cells;
            wasted += r.wasted_reserved_cells;
            pre += r.preemption_count;
        }
        Ok(Self {
            scheme: first.scheme,
            policy: first.policy,
            seed: None,
            embb_throughput_bps: rs.iter().map(SeedResult::embb_throughput_bps).sum::<f64>() / rs.len() as f64,
            urllc_mean_latency_us: lat.mean(),
            urllc_p99_latency_us: lat.percentile(0.99),
            urllc_per: lat.per(),
            wasted_reserved_fraction: if reserved == 0 { 0.0 } else { wasted as f64 / reserved as f64 },
            preemption_count: pre,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_system_csv<W: Write>(mut w: W, rows: &[SystemRow]) -> Result<()> {
    w.write_all(schema_line(SYSTEM_SCHEMA).as_bytes())?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(SYSTEM_HEADER)?;
    for r in rows {
        c.write_record([
            r.scheme.name().to_string(),
            r.policy.name().to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_else(|| "all".into()),
            r.embb_throughput_bps.to_string(),
            opt(r.urllc_mean_latency_us),
            opt(r.urllc_p99_latency_us),
            opt(r.urllc_per),
            r.wasted_reserved_fraction.to_string(),
            r.preemption_count.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

pub fn read_system_csv<R: Read>(r: R) -> Result<Vec<SystemRow>> {
    let body = split_schema(r, SYSTEM_SCHEMA)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    if rd.headers()?.iter().collect::<Vec<_>>() != SYSTEM_HEADER {
        return Err(Error::Parse("unexpected system result header".into()));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let bad = |i: usize| Error::Parse(format!("bad value '{}' in column {}", &rec[i], SYSTEM_HEADER[i]));
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(i)) };
        let maybe = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(SystemRow {
            scheme: Scheme::parse(&rec[0])?,
            policy: Policy::parse(&rec[1])?,
            seed: if &rec[2] == "all" { None } else { Some(rec[2].parse().map_err(|_| bad(2))?) },
            embb_throughput_bps: num(3)?,
            urllc_mean_latency_us: maybe(4)?,
            urllc_p99_latency_us: maybe(5)?,
            urllc_per: maybe(6)?,
            wasted_reserved_fraction: num(7)?,
            preemption_count: rec[8].parse().map_err(|_| bad(8))?,
        });
    }
    Ok(out)
}

pub fn write_bler_raw_csv<W: Write>(mut w: W, raw: &[RawBlerPoint]) -> Result<()> {
    w.write_all(schema_line(BLER_RAW_SCHEMA).as_bytes())?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["mcs", "cb_len", "snr_db", "trials", "errors"])?;
    for r in raw {
        c.write_record([
            r.mcs.to_string(),
            r.cb_len.to_string(),
            r.snr_db.to_string(),
            r.trials.to_string(),
            r.errors.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

/// Per-run seed results of a system campaign, in run order.
#[derive(Debug, Clone)]
pub struct SystemRun {
    pub seeds: Vec<SeedResult>,
    pub aggregate: SystemRow,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub files: Vec<PathBuf>,
    pub per_curves: Vec<PerCurve>,
    pub system: Vec<SystemRun>,
    pub bler_table: Option<BlerTable>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_bler_table(path: Option<&Path>) -> Result<BlerTable> {
    match path {
        Some(p) => BlerTable::read_csv(p),
        None => Ok(BlerTable::builtin()),
    }
}

/// Runs every section of `cfg`, writing results under `out_dir`.
pub fn run_scenario(cfg: &CampaignConfig, out_dir: &Path, workers: usize) -> Result<ScenarioOutput> {
    let d = cfg.diagnostics();
    if !d.is_empty() {
        return Err(Error::Config(d.join("\n")));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut out = ScenarioOutput::default();
    if let Some(c) = &cfg.calibration {
        let (table, raw) = calibrate_bler_table(c, workers)?;
        let p = out_dir.join(format!("{}_bler_table.csv", cfg.name));
        table.write_csv(&p)?;
        out.files.push(p);
        let p = out_dir.join(format!("{}_bler_raw.csv", cfg.name));
        write_bler_raw_csv(create(&p)?, &raw)?;
        out.files.push(p);
        out.bler_table = Some(table);
    }
    if let Some(l) = &cfg.link {
        for c in l.campaigns() {
            out.per_curves.push(run_link_campaign(&c, workers)?);
        }
        let p = out_dir.join(format!("{}_per.csv", cfg.name));
        write_per_csv(create(&p)?, &out.per_curves)?;
        out.files.push(p);
    }
    if let Some(s) = &cfg.system {
        let table = match (&out.bler_table, &s.bler_table) {
            (_, Some(p)) => BlerTable::read_csv(p)?,
            (Some(t), None) => t.clone(),
            (None, None) => BlerTable::builtin(),
        };
        for rc in s.resolved() {
            let seeds = run_system_campaign(&rc, &table, &s.seeds, s.slots, workers)?;
            let aggregate = SystemRow::aggregate(&seeds)?;
            out.system.push(SystemRun { seeds, aggregate });
        }
        let p = out_dir.join(format!("{}_system.csv", cfg.name));
        let rows: Vec<SystemRow> = out.system.iter().map(|r| r.aggregate.clone()).collect();
        write_system_csv(create(&p)?, &rows)?;
        out.files.push(p);
        let p = out_dir.join(format!("{}_system_seeds.csv", cfg.name));
        let rows: Vec<SystemRow> = out
            .system
            .iter()
            .flat_map(|r| r.seeds.iter().map(SystemRow::from_seed))
            .collect();
        write_system_csv(create(&p)?, &rows)?;
        out.files.push(p);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    v.map(|x| format!("{:.*}", prec, x * scale)).unwrap_or_else(|| "-".into())
}

/// Plain-text table of PER curves, with the SNR at which each crosses 1e-3.
pub fn summarize_per(curves: &[PerCurve]) -> String {
    let mut s = String::new();
    for c in curves {
        let _ = writeln!(s, "{}", c.codec);
        for p in &c.points {
            let _ = writeln!(s, "  {:>7.2} dB  per {:.3e}  ({} / {})", p.snr_db, p.per, p.errors, p.trials);
        }
        match crate::link::snr_at_per(c, 1e-3) {
            Ok(x) => {
                let _ = writeln!(s, "  PER 1e-3 at {x:.2} dB");
            }
            Err(_) => {
                let _ = writeln!(s, "  PER 1e-3 not bracketed");
            }
        }
    }
    s
}

/// Plain-text table of system rows; throughput ratios refer to the
/// baseline row when one is present.
pub fn summarize_system(rows: &[SystemRow]) -> String {
    let base = rows
        .iter()
        .find(|r| r.scheme == Scheme::Baseline && r.seed.is_none())
        .map(|r| r.embb_throughput_bps);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<21} {:>6} {:>10} {:>7} {:>10} {:>10} {:>9} {:>7} {:>8}",
        "scheme", "policy", "seed", "eMBB Mbps", "ratio", "mean us", "p99 us", "URLLC PER", "wasted", "preempt"
    );
    for r in rows {
        let ratio = base.map(|b| r.embb_throughput_bps / b);
        let _ = writeln!(
            s,
            "{:<12} {:<21} {:>6} {:>10.2} {:>7} {:>10} {:>10} {:>9} {:>7.3} {:>8}",
            r.scheme.name(),
            r.policy.name(),
            r.seed.map(|x| x.to_string()).unwrap_or_else(|| "all".into()),
            r.embb_throughput_bps / 1e6,
            fmt_opt(ratio, 1.0, 3),
            fmt_opt(r.urllc_mean_latency_us, 1.0, 1),
            fmt_opt(r.urllc_p99_latency_us, 1.0, 1),
            r.urllc_per.map(|p| format!("{p:.1e}")).unwrap_or_else(|| "-".into()),
            r.wasted_reserved_fraction,
            r.preemption_count
        );
    }
    s
}

/// Summary of any result file this crate writes.
pub fn report(path: &Path) -> Result<String> {
    let schema = detect_schema(path)?;
    let f = std::fs::File::open(path)?;
    match schema.as_str() {
        PER_SCHEMA => Ok(summarize_per(&read_per_csv(f)?)),
        SYSTEM_SCHEMA => Ok(summarize_system(&read_system_csv(f)?)),
        crate::channel::BLER_SCHEMA => {
            drop(f);
            let t = BlerTable::read_csv(path)?;
            let mut s = String::new();
            for ((mcs, cb), c) in t.entries() {
                let _ = writeln!(
                    s,
                    "mcs {mcs} cb {cb:>5}: {} points, BLER 1e-2 at {:.2} dB, 1e-3 at {:.2} dB",
                    c.snr_db.len(),
                    c.snr_for(1e-2),
                    c.snr_for(1e-3)
                );
            }
            Ok(s)
        }
        other => Err(Error::Parse(format!("{}: unknown schema '{other}'", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: Option<u64>, lat: Option<f64>) -> SystemRow {
        SystemRow {
            scheme: Scheme::Instant,
            policy: Policy::LteRetx,
            seed,
            embb_throughput_bps: 1.25e7,
            urllc_mean_latency_us: lat,
            urllc_p99_latency_us: lat.map(|l| l * 2.0),
            urllc_per: lat.map(|_| 0.0),
            wasted_reserved_fraction: 0.0,
            preemption_count: 3,
        }
    }

    #[test]
    fn system_csv_roundtrip() {
        let rows = vec![row(Some(7), Some(160.5)), row(None, None)];
        let mut buf = Vec::new();
        write_system_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema: system_results/v1\nscheme,policy,seed,"));
        assert!(text.contains("instant,lte_retx,all,12500000,,,,0,3"));
        assert_eq!(read_system_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn per_csv_roundtrip() {
        let curves = vec![PerCurve {
            codec: "svc".into(),
            points: vec![PerPoint::new(1.5, 1000, 10, 200), PerPoint::new(2.5, 2000, 1, 200)],
        }];
        let mut buf = Vec::new();
        write_per_csv(&mut buf, &curves).unwrap();
        let back = read_per_csv(&buf[..]).unwrap();
        assert_eq!(back[0].points.len(), 2);
        assert_eq!(back[0].points[1].per, 0.0005);
        assert!(String::from_utf8(buf).unwrap().lines().nth(1) == Some("codec,snr_db,trials,errors,per,ci_halfwidth"));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut buf = Vec::new();
        write_per_csv(&mut buf, &[]).unwrap();
        assert!(matches!(read_system_csv(&buf[..]), Err(Error::Parse(_))));
    }
}
