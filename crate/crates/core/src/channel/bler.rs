//! Effective-SNR to block-error-rate lookup tables.
//!
//! Each `(mcs, cb_len)` entry is a monotone curve sampled on an SNR grid.
//! Lookups interpolate `log10(bler)` linearly in dB; below the grid the BLER
//! is 1 and above it 0.

use crate::codecs::{ConvRate, Modulation};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};

pub const BLER_SCHEMA: &str = "bler_table/v1";
const LOG_FLOOR: f64 = 1e-9;

/// One modulation and coding scheme: a modulation plus a punctured rate of
/// the tail-biting convolutional code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mcs {
    pub index: u8,
    pub modulation: Modulation,
    pub rate: ConvRate,
}

impl Mcs {
    /// Information bits per resource element.
    pub fn bits_per_re(&self) -> f64 {
        self.modulation.bits_per_symbol() as f64 * self.rate.value()
    }

    pub fn by_index(index: u8) -> Result<Mcs> {
        MCS_TABLE
            .iter()
            .copied()
            .find(|m| m.index == index)
            .ok_or_else(|| Error::Config(format!("unknown MCS index {index}")))
    }
}

pub const MCS_TABLE: [Mcs; 4] = [
    Mcs {
        index: 0,
        modulation: Modulation::Qpsk,
        rate: ConvRate::OneThird,
    },
    Mcs {
        index: 1,
        modulation: Modulation::Qpsk,
        rate: ConvRate::TwoThirds,
    },
    Mcs {
        index: 2,
        modulation: Modulation::Qam16,
        rate: ConvRate::OneHalf,
    },
    Mcs {
        index: 3,
        modulation: Modulation::Qam16,
        rate: ConvRate::ThreeQuarters,
    },
];

/// Short-packet control format.
pub const URLLC_MCS: Mcs = MCS_TABLE[0];

#[derive(Debug, Clone, PartialEq)]
pub struct BlerCurve {
    pub snr_db: Vec<f64>,
    pub bler: Vec<f64>,
}

impl BlerCurve {
    pub fn new(snr_db: Vec<f64>, bler: Vec<f64>) -> Result<Self> {
        if snr_db.is_empty() || snr_db.len() != bler.len() {
            return Err(Error::Validation("BLER curve needs matching, non-empty columns".into()));
        }
        if snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("BLER curve SNR grid must be strictly increasing".into()));
        }
        if bler.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Validation("BLER values must lie in [0, 1]".into()));
        }
        if bler.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation("BLER curve must be non-increasing in SNR".into()));
        }
        Ok(Self { snr_db, bler })
    }

    pub fn eval(&self, snr_db: f64) -> f64 {
        let (x, y) = (&self.snr_db, &self.bler);
        if snr_db.is_nan() {
            return 1.0;
        }
        if snr_db < x[0] {
            return 1.0;
        }
        let last = x.len() - 1;
        if snr_db > x[last] {
            return 0.0;
        }
        let i = x.partition_point(|&v| v <= snr_db).saturating_sub(1).min(last.saturating_sub(1));
        if last == 0 || snr_db == x[i] {
            return y[i];
        }
        let t = (snr_db - x[i]) / (x[i + 1] - x[i]);
        let (a, b) = (y[i].max(LOG_FLOOR).log10(), y[i + 1].max(LOG_FLOOR).log10());
        let v = 10f64.powf(a + t * (b - a));
        if v <= LOG_FLOOR * (1.0 + 1e-9) {
            0.0
        } else {
            v.min(1.0)
        }
    }

    /// Smallest SNR at which the interpolated BLER is at most `target`.
    pub fn snr_for(&self, target: f64) -> f64 {
        let (x, y) = (&self.snr_db, &self.bler);
        if y[0] <= target {
            return x[0];
        }
        for i in 0..x.len() - 1 {
            if y[i + 1] <= target {
                let (a, b) = (y[i].max(LOG_FLOOR).log10(), y[i + 1].max(LOG_FLOOR).log10());
                let tl = target.max(LOG_FLOOR).log10();
                let t = if a == b { 1.0 } else { ((tl - a) / (b - a)).clamp(0.0, 1.0) };
                return x[i] + t * (x[i + 1] - x[i]);
            }
        }
        // The curve drops to zero just past its last point.
        x[x.len() - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlerTable {
    curves: BTreeMap<(u8, usize), BlerCurve>,
}

impl BlerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mcs: u8, cb_len: usize, curve: BlerCurve) {
        self.curves.insert((mcs, cb_len), curve);
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(u8, usize), &BlerCurve)> {
        self.curves.iter()
    }

    pub fn cb_lens(&self, mcs: u8) -> Vec<usize> {
        self.curves.keys().filter(|k| k.0 == mcs).map(|k| k.1).collect()
    }

    /// Curve for `mcs` at the tabulated codeblock length closest to `cb_len`
    /// on a log scale.
    pub fn curve(&self, mcs: u8, cb_len: usize) -> Result<&BlerCurve> {
        let best = self
            .curves
            .range((mcs, 0)..=(mcs, usize::MAX))
            .min_by(|a, b| {
                let da = ((a.0 .1 as f64) / cb_len.max(1) as f64).ln().abs();
                let db = ((b.0 .1 as f64) / cb_len.max(1) as f64).ln().abs();
                da.total_cmp(&db)
            })
            .map(|(_, c)| c);
        best.ok_or_else(|| Error::Config(format!("BLER table has no entry for MCS {mcs}")))
    }

    pub fn bler(&self, effective_snr_db: f64, mcs: u8, cb_len: usize) -> Result<f64> {
        Ok(self.curve(mcs, cb_len)?.eval(effective_snr_db))
    }

    /// Table shipped with the crate, calibrated by the link simulator.
    pub fn builtin() -> Self {
        Self::from_csv_reader(include_str!("../../data/bler_table.csv").as_bytes())
            .expect("embedded BLER table is well formed")
    }

    pub fn to_csv_writer<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema: {BLER_SCHEMA}")?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["mcs", "cb_len", "snr_db", "bler"])?;
        for (&(mcs, cb), c) in &self.curves {
            for (s, b) in c.snr_db.iter().zip(&c.bler) {
                wr.write_record([mcs.to_string(), cb.to_string(), format!("{s:.3}"), format!("{b:.6e}")])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let first = text.lines().next().unwrap_or_default();
        let version = first.strip_prefix("# schema:").map(str::trim);
        if version != Some(BLER_SCHEMA) {
            return Err(Error::Parse(format!(
                "expected BLER table header '# schema: {BLER_SCHEMA}', found '{first}'"
            )));
        }
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut raw: BTreeMap<(u8, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let bad = |what: &str| Error::Parse(format!("BLER table row {}: bad {what}", line + 1));
            let mcs: u8 = field(0).parse().map_err(|_| bad("mcs"))?;
            let cb: usize = field(1).parse().map_err(|_| bad("cb_len"))?;
            let s: f64 = field(2).parse().map_err(|_| bad("snr_db"))?;
            let b: f64 = field(3).parse().map_err(|_| bad("bler"))?;
            let e = raw.entry((mcs, cb)).or_default();
            e.0.push(s);
            e.1.push(b);
        }
        let mut t = Self::new();
        for ((mcs, cb), (s, b)) in raw {
            Mcs::by_index(mcs)?;
            t.insert(mcs, cb, BlerCurve::new(s, b)?);
        }
        Ok(t)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(f))
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BlerTable {
        let mut t = BlerTable::new();
        t.insert(
            0,
            100,
            BlerCurve::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.5, 1e-1, 1e-2, 0.0]).unwrap(),
        );
        t.insert(0, 1000, BlerCurve::new(vec![0.0, 1.0], vec![0.9, 1e-3]).unwrap());
        t
    }

    #[test]
    fn clamps_at_extremes() {
        let t = toy();
        assert_eq!(t.bler(-100.0, 0, 100).unwrap(), 1.0);
        assert_eq!(t.bler(f64::NEG_INFINITY, 0, 100).unwrap(), 1.0);
        assert_eq!(t.bler(100.0, 0, 100).unwrap(), 0.0);
        assert_eq!(t.bler(f64::INFINITY, 0, 100).unwrap(), 0.0);
    }

    #[test]
    fn grid_points_are_exact_and_log_interpolated() {
        let t = toy();
        assert_eq!(t.bler(1.0, 0, 100).unwrap(), 0.1);
        assert!((t.bler(1.5, 0, 100).unwrap() - 10f64.powf(-1.5)).abs() < 1e-12);
        assert!((t.curve(0, 100).unwrap().snr_for(10f64.powf(-1.5)) - 1.5).abs() < 1e-9);
        assert_eq!(t.bler(3.0, 0, 100).unwrap(), 0.0);
    }

    #[test]
    fn nearest_cb_len_and_unknown_mcs() {
        let t = toy();
        assert_eq!(t.bler(1.0, 0, 900).unwrap(), 1e-3);
        assert_eq!(t.bler(1.0, 0, 120).unwrap(), 0.1);
        assert!(matches!(t.bler(1.0, 3, 100), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_non_monotone_curves() {
        assert!(BlerCurve::new(vec![0.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(BlerCurve::new(vec![1.0, 0.0], vec![0.2, 0.1]).is_err());
        assert!(BlerCurve::new(vec![0.0], vec![1.5]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let t = toy();
        let mut buf = Vec::new();
        t.to_csv_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema: bler_table/v1\nmcs,cb_len,snr_db,bler\n"));
        assert_eq!(BlerTable::from_csv_reader(&buf[..]).unwrap(), t);
        assert!(BlerTable::from_csv_reader(&b"mcs,cb_len,snr_db,bler\n"[..]).is_err());
    }

    #[test]
    fn builtin_table_is_monotone_and_covers_all_mcs() {
        let t = BlerTable::builtin();
        for m in MCS_TABLE {
            let lens = t.cb_lens(m.index);
            assert!(!lens.is_empty(), "MCS {} missing", m.index);
            for cb in lens {
                let c = t.curve(m.index, cb).unwrap();
                let (lo, hi) = (c.snr_db[0] - 1.0, c.snr_db[c.snr_db.len() - 1] + 1.0);
                let mut prev = 1.0;
                let mut s = lo;
                while s <= hi {
                    let b = c.eval(s);
                    assert!(b <= prev + 1e-15);
                    prev = b;
                    s += 0.05;
                }
            }
        }
    }
}
