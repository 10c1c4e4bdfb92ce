//! Reservation patterns, proportional-fair subband assignment, link
//! adaptation and URLLC placement.

use super::harq::shannon;
use super::DynamicReservation;
use crate::channel::{linear_to_db, BlerTable, MCS_TABLE};
use crate::frame::{segment, SUBCARRIERS_PER_RB};
use std::ops::Range;

/// Symbols of a slot available for data.
pub fn data_symbols(first_data: usize, symbols_per_slot: usize) -> Range<usize> {
    first_data..symbols_per_slot
}

/// Positions of `n` reserved symbols, spread so that the gaps between
/// consecutive opportunities (wrapping into the next slot) differ by at
/// most one symbol. Positions are anchored at the slot's last symbol; when
/// that would hit control or DMRS, the spread is over data symbols only.
pub fn reserved_positions(n: usize, first_data: usize, symbols_per_slot: usize) -> Vec<usize> {
    let n_data = symbols_per_slot.saturating_sub(first_data);
    let n = n.min(n_data);
    if n == 0 {
        return Vec::new();
    }
    let last = symbols_per_slot - 1;
    let spread = |span: usize| -> Vec<usize> { (0..n).map(|j| last - span * j / n).collect() };
    let mut p = spread(symbols_per_slot);
    if p.iter().any(|&s| s < first_data) {
        p = spread(n_data);
    }
    p.sort_unstable();
    p.dedup();
    p
}

/// Reserved symbol count for the next slot: the previous slot's arrivals
/// plus headroom, clamped to the configured range.
pub fn dynamic_reservation_count(prev_arrivals: usize, d: &DynamicReservation) -> usize {
    (prev_arrivals + d.headroom).clamp(d.min_symbols, d.max_symbols)
}

/// RB ranges of consecutive subbands; the last one may be short.
pub fn subbands(n_rbs: usize, size: usize) -> Vec<Range<usize>> {
    (0..n_rbs).step_by(size.max(1)).map(|s| s..(s + size).min(n_rbs)).collect()
}

/// Subbands assigned to one eMBB user in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbbAllocation {
    pub user: u16,
    pub subbands: Vec<usize>,
}

/// A URLLC transmission that overwrote eMBB cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreemptionRecord {
    pub slot: u64,
    pub symbol: usize,
    pub packet: u32,
    pub affected: Vec<(u16, u16)>,
}

/// Highest MCS whose predicted BLER meets `target` for a transport block
/// filling `cells` cells at effective SNR `snr` (linear). Falls back to the
/// lowest MCS.
pub fn select_mcs(table: &BlerTable, snr: f64, target: f64, cells: usize, max_codeblock_bits: usize) -> u8 {
    for m in MCS_TABLE.iter().rev() {
        let tb = (cells as f64 * SUBCARRIERS_PER_RB as f64 * m.bits_per_re()).floor() as usize;
        let sizes = segment(tb, max_codeblock_bits);
        let Some(&cb) = sizes.first() else { continue };
        match table.bler(linear_to_db(snr), m.index, cb) {
            Ok(b) if b <= target => return m.index,
            _ => {}
        }
    }
    MCS_TABLE[0].index
}

/// Proportional-fair assignment of free subbands. `rate[u][b]` is the
/// instantaneous rate of user `u` on subband `b`, `avg[u]` its averaged
/// throughput; `eligible[u]` masks users that may receive new subbands.
pub fn proportional_fair(rate: &[Vec<f64>], avg: &[f64], eligible: &[bool], free: &[bool]) -> Vec<Option<u16>> {
    let n_sb = free.len();
    (0..n_sb)
        .map(|b| {
            if !free[b] {
                return None;
            }
            let mut best: Option<(u16, f64)> = None;
            for u in 0..rate.len() {
                if !eligible[u] {
                    continue;
                }
                let m = rate[u][b] / avg[u].max(1e-9);
                if best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((u as u16, m));
                }
            }
            best.map(|(u, _)| u)
        })
        .collect()
}

/// Rate estimate used by the scheduler.
pub fn subband_rate(snrs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = snrs.fold((0.0, 0usize), |(s, n), g| (s + shannon(g), n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// First URLLC opportunity of this slot for a packet ready at `ready_us`:
/// the earliest symbol in `eligible` starting no earlier than `ready_us`
/// that no other packet holds.
pub fn place_urllc(ready_us: f64, slot_start_us: f64, symbol_us: f64, eligible: &[usize], used: &[bool]) -> Option<usize> {
    eligible
        .iter()
        .copied()
        .find(|&s| !used[s] && slot_start_us + s as f64 * symbol_us >= ready_us - 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_reserved_symbols() {
        assert_eq!(reserved_positions(4, 2, 14), vec![3, 6, 10, 13]);
        assert_eq!(reserved_positions(6, 2, 14), vec![2, 4, 6, 9, 11, 13]);
        assert_eq!(reserved_positions(1, 2, 14), vec![13]);
        assert!(reserved_positions(0, 2, 14).is_empty());
        assert_eq!(reserved_positions(12, 2, 14), (2..14).collect::<Vec<_>>());
    }

    /// Exhaustive wait for arrivals on a fine grid over one slot.
    fn worst_and_mean_wait(pos: &[usize], sps: usize) -> (f64, f64) {
        let steps = 14_000;
        let mut worst: f64 = 0.0;
        let mut sum = 0.0;
        for i in 0..steps {
            let a = i as f64 * sps as f64 / steps as f64;
            let next = pos
                .iter()
                .map(|&p| p as f64)
                .chain(pos.iter().map(|&p| (p + sps) as f64))
                .filter(|&p| p >= a)
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(next - a);
            sum += next - a;
        }
        (worst, sum / steps as f64)
    }

    #[test]
    fn reserved_wait_enumeration() {
        let (worst, mean) = worst_and_mean_wait(&reserved_positions(4, 2, 14), 14);
        // Gaps of 3, 4, 3, 4 symbols.
        assert!((worst - 4.0).abs() < 1e-2, "{worst}");
        assert!((mean - (9.0 + 16.0 + 9.0 + 16.0) / 2.0 / 14.0).abs() < 1e-2, "{mean}");
    }

    #[test]
    fn dynamic_count_clamps() {
        let d = DynamicReservation::default();
        assert_eq!(dynamic_reservation_count(0, &d), 4);
        assert_eq!(dynamic_reservation_count(1, &d), 5);
        assert_eq!(dynamic_reservation_count(7, &d), 6);
        let d = DynamicReservation { min_symbols: 2, max_symbols: 6, headroom: 0 };
        assert_eq!(dynamic_reservation_count(0, &d), 2);
    }

    #[test]
    fn subband_partition() {
        let s = subbands(100, 6);
        assert_eq!(s.len(), 17);
        assert_eq!(s[16], 96..100);
        assert_eq!(s.iter().map(|r| r.len()).sum::<usize>(), 100);
    }

    #[test]
    fn pf_prefers_starved_user() {
        let rate = vec![vec![2.0, 2.0], vec![1.0, 1.0]];
        assert_eq!(proportional_fair(&rate, &[1.0, 1.0], &[true, true], &[true, true]), vec![Some(0), Some(0)]);
        assert_eq!(proportional_fair(&rate, &[4.0, 1.0], &[true, true], &[true, false]), vec![Some(1), None]);
        assert_eq!(proportional_fair(&rate, &[1.0, 1.0], &[false, true], &[true, true]), vec![Some(1), Some(1)]);
    }

    #[test]
    fn placement_waits_for_boundary() {
        let sym = 1000.0 / 14.0;
        let all: Vec<usize> = (2..14).collect();
        let mut used = vec![false; 14];
        assert_eq!(place_urllc(5.0 * sym + 1.0, 0.0, sym, &all, &used), Some(6));
        used[6] = true;
        assert_eq!(place_urllc(5.0 * sym + 1.0, 0.0, sym, &all, &used), Some(7));
        assert_eq!(place_urllc(0.0, 0.0, sym, &all, &used), Some(2));
        assert_eq!(place_urllc(13.5 * sym, 0.0, sym, &all, &used), None);
        assert_eq!(place_urllc(4.0 * sym, 0.0, sym, &[3, 6, 10, 13], &used), Some(10));
    }

    #[test]
    fn mcs_selection_orders_by_snr_and_target() {
        let t = BlerTable::builtin();
        let pick = |snr_db: f64, target: f64| select_mcs(&t, crate::channel::db_to_linear(snr_db), target, 144, 2048);
        assert_eq!(pick(-10.0, 1e-2), 0);
        assert_eq!(pick(40.0, 1e-2), 3);
        for s in [0.0, 3.0, 6.0, 9.0, 12.0] {
            assert!(pick(s, 1e-3) <= pick(s, 1e-2));
            assert!(pick(s, 1e-2) <= pick(s + 3.0, 1e-2));
        }
    }

    proptest! {
        #[test]
        fn reserved_positions_are_data_symbols(n in 0usize..14, first in 1usize..4) {
            let p = reserved_positions(n, first, 14);
            prop_assert_eq!(p.len(), n.min(14 - first));
            prop_assert!(p.iter().all(|&s| (first..14).contains(&s)));
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
