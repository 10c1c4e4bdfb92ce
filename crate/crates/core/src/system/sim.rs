//! Slot loop.

use super::coexistence::apply_coexistence;
use super::harq::{CodeblockBuffer, HarqProcess, Reception, UrllcHarq};
use super::scheduler::{
    dynamic_reservation_count, place_urllc, proportional_fair, reserved_positions, select_mcs, subband_rate, subbands,
    PreemptionRecord,
};
use super::traffic::{draw_geometries, ArrivalProcess};
use super::{Policy, Scheme, SystemConfig};
use crate::channel::{linear_to_db, realize_channel, BlerTable, URLLC_MCS};
use crate::codecs::crc::CRC_LEN;
use crate::error::{Error, Result};
use crate::frame::{map_codeblocks, puncture, Cell, CellTag, ResourceGrid, TagCounts, TbFormat, SUBCARRIERS_PER_RB};
use crate::latency::LatencyRecorder;
use crate::link::with_workers;
use crate::rng::{derive_seed, substream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::Range;

const CHANNEL_LABEL: u64 = 0x4348;
const URLLC_CHANNEL_LABEL: u64 = 0x5543;
const OUTCOME_LABEL: u64 = 0x4F55;
/// Smallest leftover allocation worth a new transport block.
const MIN_NEW_TB_CELLS: usize = 6;

/// Per-seed outcome of one scheme/policy run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub scheme: Scheme,
    pub policy: Policy,
    pub seed: u64,
    pub slots: u64,
    pub slot_us: f64,
    pub embb_delivered_bits: u64,
    pub embb_tbs_delivered: u64,
    pub embb_tbs_dropped: u64,
    pub latency: LatencyRecorder,
    pub reserved_cells: u64,
    pub wasted_reserved_cells: u64,
    pub preemption_count: u64,
    pub max_embb_attempts: u32,
    pub max_urllc_attempts: u32,
    pub urllc_arrivals: u64,
}

impl SeedResult {
    pub fn embb_throughput_bps(&self) -> f64 {
        self.embb_delivered_bits as f64 / (self.slots as f64 * self.slot_us * 1e-6)
    }

    pub fn wasted_reserved_fraction(&self) -> f64 {
        if self.reserved_cells == 0 {
            0.0
        } else {
            self.wasted_reserved_cells as f64 / self.reserved_cells as f64
        }
    }
}

/// Bookkeeping of one slot, for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEvents {
    pub slot: u64,
    pub counts: TagCounts,
    pub reserved_symbols: Vec<usize>,
    pub urllc_symbols: Vec<usize>,
    pub preemptions: Vec<PreemptionRecord>,
    pub delivered_bits: u64,
    /// eMBB cells that carried data to completion of the slot.
    pub embb_cells: usize,
    pub arrivals: usize,
}

struct UserState {
    geometry_db: f64,
    avg: f64,
    pending: Vec<HarqProcess>,
}

/// One codeblock transmission within the current slot.
struct Tx {
    user: usize,
    process: usize,
    codeblock: usize,
    cells: Vec<Cell>,
}

pub struct SystemSim<'a> {
    cfg: &'a SystemConfig,
    table: &'a BlerTable,
    seed: u64,
    slot: u64,
    users: Vec<UserState>,
    arrivals: ArrivalProcess,
    queue: Vec<UrllcHarq>,
    prev_arrivals: usize,
    next_tb: u32,
    sub: Vec<Range<usize>>,
    result: SeedResult,
}

impl<'a> SystemSim<'a> {
    pub fn new(cfg: &'a SystemConfig, table: &'a BlerTable, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let geo = draw_geometries(cfg.radio.geometry_seed, cfg.traffic.embb_users, cfg.radio.embb_geometry_db);
        Ok(Self {
            cfg,
            table,
            seed,
            slot: 0,
            users: geo
                .into_iter()
                .map(|g| UserState {
                    geometry_db: g,
                    avg: 1.0,
                    pending: Vec::new(),
                })
                .collect(),
            arrivals: ArrivalProcess::new(seed, cfg.traffic.urllc_rate_per_ms, cfg.radio.urllc_geometry_db),
            queue: Vec::new(),
            prev_arrivals: 0,
            next_tb: 0,
            sub: subbands(cfg.radio.n_rbs, cfg.scheduler.embb_subband_rbs),
            result: SeedResult {
                scheme: cfg.scheduler.scheme,
                policy: cfg.coexistence.policy,
                seed,
                slots: 0,
                slot_us: cfg.slot_us(),
                embb_delivered_bits: 0,
                embb_tbs_delivered: 0,
                embb_tbs_dropped: 0,
                latency: LatencyRecorder::new(),
                reserved_cells: 0,
                wasted_reserved_cells: 0,
                preemption_count: 0,
                max_embb_attempts: 0,
                max_urllc_attempts: 0,
                urllc_arrivals: 0,
            },
        })
    }

    pub fn result(&self) -> &SeedResult {
        &self.result
    }

    pub fn into_result(self) -> SeedResult {
        self.result
    }

    /// Post-equalization SNR of every RB for user `u` in the current slot.
    fn embb_snrs(&self, u: usize) -> Vec<f64> {
        let r = &self.cfg.radio;
        let block = self.slot / r.coherence.coherence_slots;
        let ch = realize_channel(
            derive_seed(self.seed, &[CHANNEL_LABEL, u as u64, block]),
            self.users[u].geometry_db,
            r.n_rbs,
            &r.coherence,
        );
        // LMMSE estimate from the DMRS of one subband within a tile.
        let pilots = (r.dmrs_density.res_per_rb() * self.cfg.scheduler.embb_subband_rbs.min(ch.tile_rbs())) as f64;
        let nv = ch.noise_variance;
        let mse = nv / (pilots + nv);
        (0..r.n_rbs).map(|rb| ch.gain(rb).norm_sqr() / (nv + mse)).collect()
    }

    /// Combined SNR of one URLLC attempt spread over `rbs`, repetition included.
    fn urllc_attempt_snr(&self, p: &UrllcHarq, rbs: &[usize], n_symbols: usize) -> f64 {
        let r = &self.cfg.radio;
        let ch = realize_channel(
            derive_seed(self.seed, &[URLLC_CHANNEL_LABEL, p.arrival.id as u64, p.attempts as u64]),
            p.arrival.geometry_db,
            r.n_rbs,
            &r.coherence,
        );
        let coded_symbols = ((self.cfg.traffic.urllc_payload_bits + CRC_LEN) as f64 / URLLC_MCS.bits_per_re()).ceil();
        let res = (rbs.len() * n_symbols * SUBCARRIERS_PER_RB) as f64;
        let mean = rbs
            .iter()
            .map(|&rb| ch.gain(rb).norm_sqr() / ch.noise_variance)
            .sum::<f64>()
            / rbs.len().max(1) as f64;
        mean * res / coded_symbols
    }

    /// Decodes one URLLC attempt ending at `tx_end_us`; keeps the packet
    /// queued for another attempt when it fails with retries left.
    fn finish_urllc(&mut self, mut p: UrllcHarq, snr: f64, tx_end_us: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        p.attempts += 1;
        p.accumulated_snr += snr;
        self.result.max_urllc_attempts = self.result.max_urllc_attempts.max(p.attempts);
        let cb = self.cfg.traffic.urllc_payload_bits + CRC_LEN;
        let bler = self.table.bler(linear_to_db(p.accumulated_snr), URLLC_MCS.index, cb)?;
        let sym = self.cfg.symbol_us();
        let proc = self.cfg.latency.t_proc_symbols * sym;
        if rng.random::<f64>() >= bler {
            let done = tx_end_us + proc + self.cfg.latency.t_prop_us + self.cfg.latency.t_sig_us;
            self.result.latency.record_packet_latency(p.arrival.time_us, done)?;
        } else if p.attempts > self.cfg.scheduler.urllc_max_retx {
            self.result.latency.record_failure();
        } else {
            p.ready_us = tx_end_us + proc + self.cfg.harq.urllc_turnaround_symbols as f64 * sym;
            self.queue.push(p);
        }
        Ok(())
    }

    pub fn step_slot(&mut self) -> Result<SlotEvents> {
        let cfg = self.cfg;
        let t = self.slot;
        let sps = cfg.symbols_per_slot();
        let first = cfg.first_data_symbol();
        let n_rbs = cfg.radio.n_rbs;
        let sym = cfg.symbol_us();
        let slot_start = t as f64 * cfg.slot_us();
        let scheme = cfg.scheduler.scheme;
        let policy = cfg.coexistence.policy;
        let w = cfg.coexistence.garbage_weight;
        let mut rng = substream(self.seed, &[OUTCOME_LABEL, t]);

        let new = self.arrivals.arrivals_until(slot_start + cfg.slot_us());
        let n_new = new.len();
        self.result.urllc_arrivals += n_new as u64;
        self.queue.extend(new.into_iter().map(UrllcHarq::new));
        self.queue
            .sort_by(|a, b| a.ready_us.total_cmp(&b.ready_us).then(a.arrival.id.cmp(&b.arrival.id)));

        let mut grid = ResourceGrid::with_front_loaded_overhead(sps, n_rbs, cfg.radio.control_symbols, cfg.radio.dmrs_density.symbols())?;
        let reserved = match scheme {
            Scheme::SemiStatic => reserved_positions(cfg.scheduler.reserved_symbols, first, sps),
            Scheme::Dynamic => reserved_positions(dynamic_reservation_count(self.prev_arrivals, &cfg.scheduler.dynamic), first, sps),
            _ => Vec::new(),
        };
        for &s in &reserved {
            grid.fill_symbol(s, CellTag::Reserved);
        }
        if scheme == Scheme::Dynamic {
            // Signalling the per-slot reservation costs one RB-symbol.
            if let Some(s) = (first..sps).find(|s| !reserved.contains(s)) {
                grid.claim(Cell::new(s, 0), CellTag::Control)?;
            }
        }

        // Slot-level URLLC: packets that arrived before the boundary get an
        // interleaved set of RBs over all data symbols.
        let mut baseline_tx: Vec<(UrllcHarq, Vec<usize>)> = Vec::new();
        if scheme == Scheme::Baseline {
            let n_data = sps - first;
            let per_packet = n_rbs.div_ceil(n_data);
            let stride = n_rbs.div_ceil(per_packet);
            let mut order = (0..stride).flat_map(|o| (o..n_rbs).step_by(stride));
            let mut keep = Vec::new();
            for p in std::mem::take(&mut self.queue) {
                if p.ready_us > slot_start + 1e-9 {
                    keep.push(p);
                    continue;
                }
                let rbs: Vec<usize> = order.by_ref().take(per_packet).collect();
                if rbs.len() < per_packet {
                    keep.push(p);
                    continue;
                }
                for &rb in &rbs {
                    for s in first..sps {
                        grid.claim(Cell::new(s, rb), CellTag::Urllc { packet: p.arrival.id })?;
                    }
                }
                baseline_tx.push((p, rbs));
            }
            self.queue = keep;
        }

        // eMBB scheduling.
        let n_users = self.users.len();
        let snrs: Vec<Vec<f64>> = (0..n_users).map(|u| self.embb_snrs(u)).collect();
        let n_sb = self.sub.len();
        let mut owner: Vec<Option<u16>> = vec![None; n_sb];
        let mut eligible = vec![true; n_users];
        for (u, st) in self.users.iter().enumerate() {
            for p in st.pending.iter().filter(|p| p.ready_slot == t) {
                eligible[u] = false;
                for &b in &p.subbands {
                    if owner[b].is_some_and(|o| o as usize != u) {
                        return Err(Error::Runtime(format!("subband {b} claimed by two retransmissions")));
                    }
                    owner[b] = Some(u as u16);
                }
            }
        }
        let rate: Vec<Vec<f64>> = snrs
            .iter()
            .map(|s| self.sub.iter().map(|r| subband_rate(r.clone().map(|rb| s[rb]))).collect())
            .collect();
        let avg: Vec<f64> = self.users.iter().map(|u| u.avg).collect();
        let free: Vec<bool> = owner.iter().map(Option::is_none).collect();
        for (b, o) in proportional_fair(&rate, &avg, &eligible, &free).into_iter().enumerate() {
            if o.is_some() {
                owner[b] = o;
            }
        }

        let mut txs: Vec<Tx> = Vec::new();
        let mut served = vec![0usize; n_users];
        let target = cfg.coexistence.target();
        let parity = cfg.extra_parity();
        for u in 0..n_users {
            let my: Vec<usize> = (0..n_sb).filter(|&b| owner[b] == Some(u as u16)).collect();
            if my.is_empty() {
                continue;
            }
            let rbs: Vec<usize> = my.iter().flat_map(|&b| self.sub[b].clone()).collect();
            let cells = grid.free_cells(first..sps, &rbs);
            let mut cursor = 0;
            let mut cb_tag = 0u16;
            let ready: Vec<usize> = (0..self.users[u].pending.len())
                .filter(|&i| self.users[u].pending[i].ready_slot == t)
                .collect();
            for &pi in &ready {
                let proc = &self.users[u].pending[pi];
                let plan = apply_coexistence(policy, proc)
                    .ok_or_else(|| Error::Runtime("completed process scheduled for retransmission".into()))?;
                for cb in plan.codeblocks {
                    let need = proc.codeblocks[cb].n_cells();
                    let end = (cursor + need).min(cells.len());
                    let taken = cells[cursor..end].to_vec();
                    for &c in &taken {
                        grid.claim(c, CellTag::Embb { user: u as u16, codeblock: cb_tag })?;
                    }
                    cursor = end;
                    cb_tag += 1;
                    txs.push(Tx {
                        user: u,
                        process: pi,
                        codeblock: cb,
                        cells: taken,
                    });
                }
            }
            let left = &cells[cursor..];
            if left.len() < MIN_NEW_TB_CELLS {
                continue;
            }
            let eff = crate::channel::effective_snr(&left.iter().map(|c| snrs[u][c.rb as usize]).collect::<Vec<_>>());
            let mcs = select_mcs(self.table, eff, target, left.len(), cfg.radio.max_codeblock_bits);
            let bpr = crate::channel::Mcs::by_index(mcs)?.bits_per_re();
            let bits_per_cell = SUBCARRIERS_PER_RB as f64 * bpr * (1.0 - parity);
            // Guard against the product landing a hair above an integer.
            let tb = (left.len() as f64 * bits_per_cell * (1.0 - 1e-12)).floor() as usize;
            if tb <= CRC_LEN {
                continue;
            }
            let id = self.next_tb;
            self.next_tb = self.next_tb.wrapping_add(1);
            let maps = map_codeblocks(
                tb,
                &mut grid,
                left,
                &TbFormat {
                    user: u as u16,
                    transport_block_id: id,
                    bits_per_cell,
                    max_codeblock_bits: cfg.radio.max_codeblock_bits,
                },
            )?;
            let pi = self.users[u].pending.len();
            let mut proc = HarqProcess {
                id,
                user: u as u16,
                mcs,
                subbands: my.clone(),
                codeblocks: Vec::with_capacity(maps.len()),
                extra_parity: parity,
                attempts: 0,
                ready_slot: t,
            };
            for m in maps {
                for &c in &m.cells {
                    grid.set(c, CellTag::Embb { user: u as u16, codeblock: cb_tag });
                }
                cb_tag += 1;
                proc.codeblocks.push(CodeblockBuffer::new(m.info_bits, m.cells.len()));
                txs.push(Tx {
                    user: u,
                    process: pi,
                    codeblock: m.codeblock_index as usize,
                    cells: m.cells,
                });
            }
            served[u] += proc.payload_bits();
            self.users[u].pending.push(proc);
        }

        // URLLC in mini-slots.
        let mut urllc_symbols = Vec::new();
        let mut preemptions = Vec::new();
        let mut decoded_urllc: Vec<(UrllcHarq, f64, f64)> = Vec::new();
        if scheme != Scheme::Baseline {
            let eligible: Vec<usize> = if scheme == Scheme::Instant {
                (first..sps)
                    .filter(|&s| !grid.symbol_tags(s).iter().any(|t| matches!(t, CellTag::Control | CellTag::Dmrs)))
                    .collect()
            } else {
                reserved.clone()
            };
            let mut used = vec![false; sps];
            let all_rbs: Vec<usize> = (0..n_rbs).collect();
            let mut keep = Vec::new();
            for p in std::mem::take(&mut self.queue) {
                match place_urllc(p.ready_us, slot_start, sym, &eligible, &used) {
                    Some(s) => {
                        used[s] = true;
                        let out = puncture(&mut grid, &[s], p.arrival.id)?;
                        if out.mask.entries.iter().any(|(_, tag)| matches!(tag, CellTag::Embb { .. })) {
                            preemptions.push(PreemptionRecord {
                                slot: t,
                                symbol: s,
                                packet: p.arrival.id,
                                affected: out.affected.into_iter().collect(),
                            });
                        }
                        urllc_symbols.push(s);
                        let snr = self.urllc_attempt_snr(&p, &all_rbs, cfg.scheduler.urllc_tti_symbols);
                        decoded_urllc.push((p, snr, slot_start + (s + 1) as f64 * sym));
                    }
                    None => keep.push(p),
                }
            }
            self.queue = keep;
        }
        for (p, rbs) in baseline_tx {
            let snr = self.urllc_attempt_snr(&p, &rbs, sps - first);
            decoded_urllc.push((p, snr, slot_start + cfg.slot_us()));
        }
        // eMBB decoding happens after puncturing; URLLC outcomes are drawn first.
        decoded_urllc.sort_by_key(|d| d.0.arrival.id);
        for (p, snr, end) in decoded_urllc {
            self.finish_urllc(p, snr, end, &mut rng)?;
        }

        // eMBB reception.
        let excise = policy.indicator_known();
        let mut embb_cells = 0;
        for tx in &txs {
            let buf = &mut self.users[tx.user].pending[tx.process].codeblocks[tx.codeblock];
            for (k, &c) in tx.cells.iter().enumerate() {
                let s = snrs[tx.user][c.rb as usize];
                let r = match grid.get(c) {
                    CellTag::Urllc { .. } if excise => Reception::Erased,
                    CellTag::Urllc { .. } => Reception::Corrupted(s),
                    _ => {
                        embb_cells += 1;
                        Reception::Clean(s)
                    }
                };
                buf.combine(k, r);
            }
        }
        let mut transmitted: Vec<(usize, usize)> = txs.iter().map(|x| (x.user, x.process)).collect();
        transmitted.dedup();
        let mut delivered = 0u64;
        for &(u, pi) in &transmitted {
            let p = &mut self.users[u].pending[pi];
            p.attempts += 1;
            self.result.max_embb_attempts = self.result.max_embb_attempts.max(p.attempts);
            for i in 0..p.codeblocks.len() {
                if p.codeblocks[i].decoded {
                    continue;
                }
                let bler = self.table.bler(linear_to_db(p.decoding_snr(i, w)), p.mcs, p.codeblocks[i].bits)?;
                p.codeblocks[i].decoded = rng.random::<f64>() >= bler;
            }
        }
        for (u, st) in self.users.iter_mut().enumerate() {
            let mut i = 0;
            while i < st.pending.len() {
                let p = &mut st.pending[i];
                if p.ready_slot != t {
                    i += 1;
                    continue;
                }
                if p.complete() {
                    delivered += p.payload_bits() as u64;
                    self.result.embb_tbs_delivered += 1;
                    st.pending.swap_remove(i);
                } else if p.attempts > cfg.scheduler.embb_max_retx {
                    self.result.embb_tbs_dropped += 1;
                    st.pending.swap_remove(i);
                } else {
                    p.ready_slot = t + cfg.harq.embb_turnaround_slots;
                    i += 1;
                }
            }
            st.pending.sort_by_key(|p| p.id);
            let a = 1.0 / cfg.scheduler.pf_window_slots;
            st.avg = (1.0 - a) * st.avg + a * served[u] as f64;
        }

        let counts = grid.counts();
        if counts.total() != sps * n_rbs {
            return Err(Error::Runtime(format!("slot {t}: grid holds {} cells", counts.total())));
        }
        self.result.embb_delivered_bits += delivered;
        self.result.reserved_cells += (reserved.len() * n_rbs) as u64;
        self.result.wasted_reserved_cells += counts.reserved as u64;
        self.result.preemption_count += preemptions.len() as u64;
        self.result.slots += 1;
        self.prev_arrivals = n_new;
        self.slot += 1;
        Ok(SlotEvents {
            slot: t,
            counts,
            reserved_symbols: reserved,
            urllc_symbols,
            preemptions,
            delivered_bits: delivered,
            embb_cells,
            arrivals: n_new,
        })
    }
}

/// Runs one seed for `slots` slots.
pub fn run_system(cfg: &SystemConfig, table: &BlerTable, seed: u64, slots: u64) -> Result<SeedResult> {
    let mut sim = SystemSim::new(cfg, table, seed)?;
    for _ in 0..slots {
        sim.step_slot()?;
    }
    Ok(sim.into_result())
}

/// Runs every seed, in parallel over `workers` threads; results follow the
/// order of `seeds`.
pub fn run_system_campaign(
    cfg: &SystemConfig,
    table: &BlerTable,
    seeds: &[u64],
    slots: u64,
    workers: usize,
) -> Result<Vec<SeedResult>> {
    cfg.validate()?;
    with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&s| run_system(cfg, table, s, slots))
            .collect::<Result<Vec<_>>>()
    })?
}
