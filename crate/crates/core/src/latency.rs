//! Five-term latency decomposition and per-packet latency statistics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Latency components in µs. The total is their plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub t_ttt: f64,
    pub t_prop: f64,
    pub t_proc: f64,
    pub t_retx: f64,
    pub t_sig: f64,
}

impl LatencyBudget {
    fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("t_ttt", self.t_ttt),
            ("t_prop", self.t_prop),
            ("t_proc", self.t_proc),
            ("t_retx", self.t_retx),
            ("t_sig", self.t_sig),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.components() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t_ttt: self.t_ttt * c,
            t_prop: self.t_prop * c,
            t_proc: self.t_proc * c,
            t_retx: self.t_retx * c,
            t_sig: self.t_sig * c,
        }
    }
}

pub fn total_latency(b: &LatencyBudget) -> Result<f64> {
    b.validate()?;
    Ok(b.t_ttt + b.t_prop + b.t_proc + b.t_retx + b.t_sig)
}

/// Retransmission delay: each extra attempt costs one TTI plus the feedback turnaround.
pub fn retx_delay(n_retx: u32, t_ttt: f64, turnaround: f64) -> f64 {
    n_retx as f64 * (t_ttt + turnaround)
}

/// Fixed per-packet latency terms applied by the system simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyTerms {
    pub t_prop_us: f64,
    /// Decoder processing time in symbol durations, charged per attempt.
    pub t_proc_symbols: f64,
    pub t_sig_us: f64,
}

impl Default for LatencyTerms {
    fn default() -> Self {
        Self {
            t_prop_us: 3.0,
            t_proc_symbols: 1.0,
            t_sig_us: 0.0,
        }
    }
}

impl LatencyTerms {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_prop_us", self.t_prop_us),
            ("t_proc_symbols", self.t_proc_symbols),
            ("t_sig_us", self.t_sig_us),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Accumulates delivered-packet latencies and counts failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyRecorder {
    samples: Vec<f64>,
    failures: u64,
}

impl LatencyRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a delivered packet and returns its latency.
    pub fn record_packet_latency(&mut self, arrival_us: f64, success_us: f64) -> Result<f64> {
        if !(success_us >= arrival_us) {
            return Err(Error::Validation(format!(
                "success time {success_us} precedes arrival {arrival_us}"
            )));
        }
        let d = success_us - arrival_us;
        self.samples.push(d);
        Ok(d)
    }

    /// A packet that exhausted its retransmissions.
    pub fn record_failure(&mut self) {
        self.failures += 1;
    }

    pub fn merge(&mut self, other: &LatencyRecorder) {
        self.samples.extend_from_slice(&other.samples);
        self.failures += other.failures;
    }

    pub fn delivered(&self) -> usize {
        self.samples.len()
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Failed fraction of all finished packets; `None` with no packets.
    pub fn per(&self) -> Option<f64> {
        let n = self.samples.len() as u64 + self.failures;
        (n > 0).then(|| self.failures as f64 / n as f64)
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }

    /// Nearest-rank percentile, `q` in (0, 1). Returns `None` when fewer than
    /// `1 / (1 - q)` samples exist, since the tail is then unresolved.
    pub fn percentile(&self, q: f64) -> Option<f64> {
        if self.samples.is_empty() || !(0.0..1.0).contains(&q) {
            return None;
        }
        let n = self.samples.len();
        if (n as f64) < 1.0 / (1.0 - q) - 1e-9 {
            return None;
        }
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        Some(v[rank - 1])
    }

    pub fn summary(&self) -> LatencySummary {
        LatencySummary {
            delivered: self.delivered() as u64,
            failures: self.failures,
            mean: self.mean(),
            p50: self.percentile(0.5),
            p99: self.percentile(0.99),
            p99999: self.percentile(0.99999),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencySummary {
    pub delivered: u64,
    pub failures: u64,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p99: Option<f64>,
    pub p99999: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn budget_arithmetic() {
        let b = LatencyBudget {
            t_ttt: 142.0,
            t_prop: 3.0,
            t_proc: 100.0,
            t_retx: 0.0,
            t_sig: 50.0,
        };
        assert_eq!(total_latency(&b).unwrap(), 295.0);
        assert_eq!(total_latency(&LatencyBudget::default()).unwrap(), 0.0);
    }

    #[test]
    fn negative_component_rejected() {
        let b = LatencyBudget {
            t_prop: -1.0,
            ..Default::default()
        };
        assert!(matches!(total_latency(&b), Err(Error::Validation(_))));
        let b = LatencyBudget {
            t_sig: f64::NAN,
            ..Default::default()
        };
        assert!(total_latency(&b).is_err());
    }

    #[test]
    fn one_symbol_retransmission() {
        let tti = 1000.0 / 14.0;
        let extra = retx_delay(1, tti, 100.0);
        assert!((extra - 171.43).abs() < 0.01);
        let base = LatencyBudget {
            t_ttt: tti,
            ..Default::default()
        };
        let with = LatencyBudget { t_retx: extra, ..base };
        assert!((total_latency(&with).unwrap() - total_latency(&base).unwrap() - 171.43).abs() < 0.01);
    }

    #[test]
    fn recorder_statistics() {
        let mut r = LatencyRecorder::new();
        assert_eq!(r.record_packet_latency(0.0, 160.0).unwrap(), 160.0);
        r.record_packet_latency(1000.0, 1100.0).unwrap();
        r.record_failure();
        assert_eq!(r.delivered(), 2);
        assert_eq!(r.mean(), Some(130.0));
        assert_eq!(r.per(), Some(1.0 / 3.0));
        assert!(r.record_packet_latency(5.0, 4.0).is_err());
        assert_eq!(r.percentile(0.5), Some(100.0));
        assert_eq!(r.percentile(0.99), None);
    }

    #[test]
    fn percentiles_need_enough_samples() {
        let mut r = LatencyRecorder::new();
        for i in 0..100 {
            r.record_packet_latency(0.0, i as f64).unwrap();
        }
        assert_eq!(r.percentile(0.99), Some(98.0));
        assert_eq!(r.percentile(0.5), Some(49.0));
        assert_eq!(r.summary().p99999, None);
    }

    #[test]
    fn queuing_wait_is_part_of_latency() {
        // Two packets arrive mid-symbol and are each served at the next
        // one-symbol mini-slot; the trace below is worked out by hand.
        let sym: f64 = 1000.0 / 14.0;
        let arrivals = [10.0, 100.0];
        let mut r = LatencyRecorder::new();
        for a in arrivals {
            let start = (a / sym).ceil() * sym;
            r.record_packet_latency(a, start + sym).unwrap();
        }
        let expect = [2.0 * sym - 10.0, 3.0 * sym - 100.0];
        for (got, want) in r.samples().iter().zip(expect) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn total_is_linear(
            parts in proptest::array::uniform5(0.0f64..1e4),
            c in 0.0f64..100.0,
        ) {
            let b = LatencyBudget { t_ttt: parts[0], t_prop: parts[1], t_proc: parts[2], t_retx: parts[3], t_sig: parts[4] };
            let t = total_latency(&b).unwrap();
            let ts = total_latency(&b.scaled(c)).unwrap();
            prop_assert!((ts - c * t).abs() <= 1e-9 * (1.0 + c * t));
        }
    }
}
