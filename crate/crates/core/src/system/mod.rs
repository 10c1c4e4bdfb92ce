//! Slot-driven downlink simulator multiplexing full-buffer eMBB users with
//! sporadic URLLC packets.
//!
//! eMBB transport blocks are scheduled per slot with proportional fairness
//! over 6-RB subbands and evaluated through the BLER table at a
//! mutual-information effective SNR. URLLC packets occupy whole symbols
//! across the full band and are placed according to the scheduling scheme;
//! under instant scheduling they puncture eMBB codeblocks, and the
//! coexistence policy decides how the damage is repaired.

mod coexistence;
mod harq;
mod scheduler;
mod sim;
mod traffic;

pub use coexistence::{apply_coexistence, RetransmissionPlan};
pub use harq::{cell_information, puncture_snr_penalty, shannon, CodeblockBuffer, HarqProcess, Reception, UrllcHarq};
pub use scheduler::{
    data_symbols, dynamic_reservation_count, place_urllc, proportional_fair, reserved_positions, select_mcs,
    subband_rate, subbands, EmbbAllocation, PreemptionRecord,
};
pub use sim::{run_system, run_system_campaign, SeedResult, SlotEvents, SystemSim};
pub use traffic::{draw_geometries, ArrivalProcess, UrllcArrival};

use crate::channel::{CoherenceConfig, DmrsDensity};
use crate::error::{Error, Result};
use crate::frame::Numerology;
use crate::latency::LatencyTerms;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Slot-level scheduling at the next slot boundary.
    Baseline,
    /// Next symbol boundary, puncturing ongoing eMBB.
    Instant,
    /// Fixed reserved symbols in every slot.
    SemiStatic,
    /// Reserved symbols whose count follows recent load.
    Dynamic,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Instant => "instant",
            Scheme::SemiStatic => "semi_static",
            Scheme::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Scheme::Baseline),
            "instant" => Ok(Scheme::Instant),
            "semi_static" => Ok(Scheme::SemiStatic),
            "dynamic" => Ok(Scheme::Dynamic),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }

    pub fn reserves(self) -> bool {
        matches!(self, Scheme::SemiStatic | Scheme::Dynamic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Whole-TB HARQ; punctured cells corrupt the soft buffer.
    LteRetx,
    /// Whole-TB HARQ; punctured cells are excised from soft combining.
    PreemptionIndicator,
    /// Only failed codeblocks are retransmitted and chase-combined.
    CodeblockRetx,
    /// Lower initial code rate sized to survive a puncture; whole-TB HARQ.
    Robustness,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::LteRetx => "lte_retx",
            Policy::PreemptionIndicator => "preemption_indicator",
            Policy::CodeblockRetx => "codeblock_retx",
            Policy::Robustness => "robustness",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lte_retx" => Ok(Policy::LteRetx),
            "preemption_indicator" => Ok(Policy::PreemptionIndicator),
            "codeblock_retx" => Ok(Policy::CodeblockRetx),
            "robustness" => Ok(Policy::Robustness),
            other => Err(Error::Config(format!("unknown policy '{other}'"))),
        }
    }

    pub fn indicator_known(self) -> bool {
        matches!(self, Policy::PreemptionIndicator)
    }

    pub fn codeblock_level(self) -> bool {
        matches!(self, Policy::CodeblockRetx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub numerology: Numerology,
    pub n_rbs: usize,
    pub control_symbols: usize,
    pub dmrs_density: DmrsDensity,
    pub coherence: CoherenceConfig,
    /// Range of the per-user mean SNR in dB, drawn uniformly once per campaign.
    pub embb_geometry_db: [f64; 2],
    pub urllc_geometry_db: [f64; 2],
    pub geometry_seed: u64,
    /// Largest eMBB codeblock in bits, CRC included.
    pub max_codeblock_bits: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            numerology: Numerology::default(),
            n_rbs: 100,
            control_symbols: 1,
            dmrs_density: DmrsDensity::Single,
            coherence: CoherenceConfig::default(),
            embb_geometry_db: [4.0, 16.0],
            urllc_geometry_db: [4.0, 16.0],
            geometry_seed: 0x6E0_5EED,
            max_codeblock_bits: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub embb_users: usize,
    /// Mean URLLC arrivals per millisecond.
    pub urllc_rate_per_ms: f64,
    pub urllc_payload_bits: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            embb_users: 10,
            urllc_rate_per_ms: 1.0,
            urllc_payload_bits: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicReservation {
    pub min_symbols: usize,
    pub max_symbols: usize,
    /// Symbols reserved on top of the previous slot's arrival count.
    pub headroom: usize,
}

impl Default for DynamicReservation {
    fn default() -> Self {
        Self {
            min_symbols: 1,
            max_symbols: 6,
            headroom: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub scheme: Scheme,
    pub reserved_symbols: usize,
    pub embb_subband_rbs: usize,
    pub urllc_bandwidth_rbs: usize,
    pub urllc_tti_symbols: usize,
    pub urllc_max_retx: u32,
    pub embb_max_retx: u32,
    pub dynamic: DynamicReservation,
    /// Averaging window of the proportional-fair throughput estimate, in slots.
    pub pf_window_slots: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Instant,
            reserved_symbols: 4,
            embb_subband_rbs: 6,
            urllc_bandwidth_rbs: 100,
            urllc_tti_symbols: 1,
            urllc_max_retx: 2,
            embb_max_retx: 4,
            dynamic: DynamicReservation::default(),
            pf_window_slots: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoexistenceConfig {
    pub policy: Policy,
    pub embb_bler_target: f64,
    pub robust_bler_target: f64,
    /// Weight of misleading information from unflagged punctured cells
    /// relative to clean cells (1 would make them plain erasures).
    pub garbage_weight: f64,
    /// Share of each robust codeblock's cells carrying extra parity. The
    /// default covers one punctured symbol of a four-symbol codeblock.
    pub robust_parity_fraction: f64,
}

impl Default for CoexistenceConfig {
    fn default() -> Self {
        Self {
            policy: Policy::LteRetx,
            embb_bler_target: 1e-2,
            robust_bler_target: 1e-3,
            garbage_weight: 1.25,
            robust_parity_fraction: 0.25,
        }
    }
}

impl CoexistenceConfig {
    /// BLER target used for initial MCS selection.
    pub fn target(&self) -> f64 {
        match self.policy {
            Policy::Robustness => self.robust_bler_target,
            _ => self.embb_bler_target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarqTiming {
    pub embb_turnaround_slots: u64,
    pub urllc_turnaround_symbols: u64,
}

impl Default for HarqTiming {
    fn default() -> Self {
        Self {
            embb_turnaround_slots: 1,
            urllc_turnaround_symbols: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub radio: RadioConfig,
    pub traffic: TrafficConfig,
    pub scheduler: SchedulerConfig,
    pub coexistence: CoexistenceConfig,
    pub harq: HarqTiming,
    pub latency: LatencyTerms,
}

impl SystemConfig {
    /// Every violated constraint, each prefixed by its key path.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        let r = &self.radio;
        if let Err(e) = r.numerology.validate() {
            d.push(format!("radio.numerology: {e}"));
        }
        let sps = r.numerology.symbols_per_slot as usize;
        if r.n_rbs == 0 {
            d.push("radio.n_rbs: must be positive".into());
        }
        if r.control_symbols + r.dmrs_density.symbols() >= sps {
            d.push(format!(
                "radio.control_symbols: control plus DMRS symbols leave no data symbol in a {sps}-symbol slot"
            ));
        }
        if let Err(e) = r.coherence.validate() {
            d.push(format!("radio.coherence: {e}"));
        }
        for (name, g) in [("radio.embb_geometry_db", r.embb_geometry_db), ("radio.urllc_geometry_db", r.urllc_geometry_db)] {
            if !(g[0].is_finite() && g[1].is_finite() && g[0] <= g[1]) {
                d.push(format!("{name}: expected [low, high] with low <= high"));
            }
        }
        if r.max_codeblock_bits <= crate::codecs::crc::CRC_LEN {
            d.push("radio.max_codeblock_bits: must exceed the 16-bit CRC".into());
        }
        let t = &self.traffic;
        if t.embb_users == 0 || t.embb_users > u16::MAX as usize {
            d.push("traffic.embb_users: must be between 1 and 65535".into());
        }
        if !(t.urllc_rate_per_ms.is_finite() && t.urllc_rate_per_ms >= 0.0) {
            d.push("traffic.urllc_rate_per_ms: must be finite and non-negative".into());
        }
        if t.urllc_payload_bits == 0 {
            d.push("traffic.urllc_payload_bits: must be positive".into());
        }
        let s = &self.scheduler;
        if s.reserved_symbols > sps {
            d.push(format!(
                "scheduler.reserved_symbols: {} exceeds the {sps} symbols of a slot",
                s.reserved_symbols
            ));
        }
        let n_data = sps.saturating_sub(r.control_symbols + r.dmrs_density.symbols());
        if s.scheme.reserves() && s.reserved_symbols <= sps && s.reserved_symbols > n_data {
            d.push(format!(
                "scheduler.reserved_symbols: {} exceeds the {n_data} data symbols of a slot",
                s.reserved_symbols
            ));
        }
        if s.scheme == Scheme::SemiStatic && s.reserved_symbols == 0 {
            d.push("scheduler.reserved_symbols: semi-static reservation needs at least one symbol".into());
        }
        let dy = &s.dynamic;
        if dy.min_symbols == 0 || dy.min_symbols > dy.max_symbols || dy.max_symbols > n_data {
            d.push(format!(
                "scheduler.dynamic: need 1 <= min_symbols <= max_symbols <= {n_data} data symbols"
            ));
        }
        if s.embb_subband_rbs == 0 || s.embb_subband_rbs > r.n_rbs {
            d.push("scheduler.embb_subband_rbs: must be between 1 and n_rbs".into());
        }
        if s.urllc_bandwidth_rbs != r.n_rbs {
            d.push("scheduler.urllc_bandwidth_rbs: URLLC packets span the full band; must equal radio.n_rbs".into());
        }
        if s.urllc_tti_symbols != 1 {
            d.push("scheduler.urllc_tti_symbols: only one-symbol URLLC TTIs are modeled".into());
        }
        if !(s.pf_window_slots >= 1.0) {
            d.push("scheduler.pf_window_slots: must be at least 1".into());
        }
        let c = &self.coexistence;
        for (name, v) in [("coexistence.embb_bler_target", c.embb_bler_target), ("coexistence.robust_bler_target", c.robust_bler_target)] {
            if !(v > 0.0 && v < 1.0) {
                d.push(format!("{name}: must lie in (0, 1)"));
            }
        }
        if !(c.garbage_weight >= 1.0) {
            d.push("coexistence.garbage_weight: must be at least 1".into());
        }
        if !(0.0..0.9).contains(&c.robust_parity_fraction) {
            d.push("coexistence.robust_parity_fraction: must lie in [0, 0.9)".into());
        }
        if let Err(e) = self.latency.validate() {
            d.push(format!("latency: {e}"));
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }

    pub fn symbol_us(&self) -> f64 {
        self.radio.numerology.symbol_duration_us()
    }

    pub fn slot_us(&self) -> f64 {
        self.radio.numerology.slot_duration_us()
    }

    pub fn symbols_per_slot(&self) -> usize {
        self.radio.numerology.symbols_per_slot as usize
    }

    pub fn first_data_symbol(&self) -> usize {
        self.radio.control_symbols + self.radio.dmrs_density.symbols()
    }

    /// Extra parity share of new transport blocks; zero unless robust.
    pub fn extra_parity(&self) -> f64 {
        if self.coexistence.policy != Policy::Robustness {
            return 0.0;
        }
        self.coexistence.robust_parity_fraction
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(SystemConfig::default().validate().is_ok());
    }

    #[test]
    fn oversized_reservation_is_named() {
        let mut c = SystemConfig::default();
        c.scheduler.reserved_symbols = 20;
        let d = c.diagnostics();
        assert!(d.iter().any(|m| m.starts_with("scheduler.reserved_symbols") && m.contains("14")), "{d:?}");
    }

    #[test]
    fn names_roundtrip() {
        for s in [Scheme::Baseline, Scheme::Instant, Scheme::SemiStatic, Scheme::Dynamic] {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        for p in [Policy::LteRetx, Policy::PreemptionIndicator, Policy::CodeblockRetx, Policy::Robustness] {
            assert_eq!(Policy::parse(p.name()).unwrap(), p);
        }
        assert!(Scheme::parse("eager").is_err());
    }

    #[test]
    fn robustness_uses_tighter_target() {
        let mut c = CoexistenceConfig::default();
        assert_eq!(c.target(), 1e-2);
        c.policy = Policy::Robustness;
        assert_eq!(c.target(), 1e-3);
    }
}
