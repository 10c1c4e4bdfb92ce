//! Monte Carlo link-level harness: PER-vs-SNR curves for the short-packet
//! codecs over the block-fading channel, and BLER table calibration for the
//! system simulator.
//!
//! Trials are grouped in fixed-size blocks; block `b` of SNR point `i` draws
//! from the substream `(seed, i, b)`. Blocks are evaluated in parallel waves
//! but merged in index order, and the stop rule is applied to that ordered
//! prefix, so results never depend on the number of workers.

use crate::channel::{
    complex_gaussian, db_to_linear, estimate_channel, mmse_equalize, observe_pilots, BlerCurve, BlerTable,
    ChannelEstimate, CoherenceConfig, DmrsDensity, Mcs, URLLC_MCS,
};
use crate::codecs::{crc, CcCodec, ConvCode, ConvRate, Modulation, PolarCodec, SvcCodec, SvcParams};
use crate::error::{Error, Result};
use crate::rng::substream;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Trials per block. Part of the result definition: changing it changes the
/// random streams.
pub const BLOCK_TRIALS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodecSpec {
    Svc {
        n: usize,
        m: usize,
        k: usize,
        spreading_seed: u64,
    },
    Cc {
        payload_bits: usize,
        rate: ConvRate,
    },
    Polar {
        payload_bits: usize,
        coded_bits: usize,
        list_size: usize,
        design_snr_db: f64,
    },
}

impl CodecSpec {
    pub fn svc_default() -> Self {
        let p = SvcParams::default();
        CodecSpec::Svc {
            n: p.n,
            m: p.m,
            k: p.k,
            spreading_seed: p.spreading_seed,
        }
    }

    pub fn cc_default() -> Self {
        CodecSpec::Cc {
            payload_bits: 12,
            rate: ConvRate::OneThird,
        }
    }

    pub fn polar_default() -> Self {
        CodecSpec::Polar {
            payload_bits: 12,
            coded_bits: 4 * (12 + crc::CRC_LEN),
            list_size: 8,
            design_snr_db: -5.0,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            CodecSpec::Svc { .. } => "svc",
            CodecSpec::Cc { .. } => "cc",
            CodecSpec::Polar { .. } => "polar",
        }
    }

    pub fn build(&self) -> Result<Codec> {
        Ok(match *self {
            CodecSpec::Svc { n, m, k, spreading_seed } => Codec::Svc(SvcCodec::new(SvcParams {
                n,
                m,
                k,
                spreading_seed,
            })?),
            CodecSpec::Cc { payload_bits, rate } => {
                if payload_bits == 0 {
                    return Err(Error::Domain("CC payload must be non-empty".into()));
                }
                Codec::Cc(CcCodec::new(payload_bits, rate))
            }
            CodecSpec::Polar {
                payload_bits,
                coded_bits,
                list_size,
                design_snr_db,
            } => {
                if list_size == 0 {
                    return Err(Error::Domain("polar list size must be at least 1".into()));
                }
                if coded_bits % 2 != 0 {
                    return Err(Error::Domain("polar coded length must be even for QPSK".into()));
                }
                Codec::Polar(PolarCodec::new(payload_bits, coded_bits, list_size, design_snr_db)?)
            }
        })
    }
}

/// A constructed codec ready for trials.
#[derive(Debug, Clone)]
pub enum Codec {
    Svc(SvcCodec),
    Cc(CcCodec),
    Polar(PolarCodec),
}

impl Codec {
    pub fn payload_len(&self) -> usize {
        match self {
            Codec::Svc(c) => c.payload_len(),
            Codec::Cc(c) => c.payload_len(),
            Codec::Polar(c) => c.payload_len(),
        }
    }

    /// Resource elements per packet (QPSK for the bit-oriented codecs).
    pub fn n_res(&self) -> usize {
        match self {
            Codec::Svc(c) => c.params().m,
            Codec::Cc(c) => c.coded_len().div_ceil(2),
            Codec::Polar(c) => c.coded_len().div_ceil(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    /// Channel from the DMRS-based LMMSE estimate.
    #[default]
    Estimated,
    /// Perfect channel knowledge.
    Genie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    BlockRayleigh,
    Awgn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkChannelConfig {
    pub n_rbs: usize,
    pub coherence: CoherenceConfig,
    pub dmrs_density: DmrsDensity,
    pub receiver: Receiver,
    pub fading: Fading,
}

impl Default for LinkChannelConfig {
    fn default() -> Self {
        Self {
            n_rbs: 100,
            coherence: CoherenceConfig::default(),
            dmrs_density: DmrsDensity::Single,
            receiver: Receiver::Estimated,
            fading: Fading::BlockRayleigh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCampaign {
    pub codec: CodecSpec,
    pub snr_db: Vec<f64>,
    pub max_trials: u64,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: LinkChannelConfig,
}

fn default_target_errors() -> u64 {
    200
}

impl LinkCampaign {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR grid is empty".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) || self.snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("SNR grid must be finite and strictly increasing".into()));
        }
        if self.target_errors == 0 || self.max_trials < self.target_errors {
            return Err(Error::Config(format!(
                "max_trials ({}) must be at least target_errors ({}) and both positive",
                self.max_trials, self.target_errors
            )));
        }
        if self.channel.n_rbs == 0 {
            return Err(Error::Config("n_rbs must be positive".into()));
        }
        self.channel.coherence.validate()?;
        self.codec.build().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub per: f64,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: f64,
    /// Fewer error events than the target were observed.
    pub under_sampled: bool,
}

impl PerPoint {
    pub fn new(snr_db: f64, trials: u64, errors: u64, target_errors: u64) -> Self {
        let per = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        let ci = if trials == 0 {
            0.0
        } else {
            1.96 * (per * (1.0 - per) / trials as f64).sqrt()
        };
        Self {
            snr_db,
            trials,
            errors,
            per,
            ci_halfwidth: ci,
            under_sampled: errors < target_errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerCurve {
    pub codec: String,
    pub points: Vec<PerPoint>,
}

/// Runs blocks `0..ceil(max_trials / BLOCK_TRIALS)` in waves and merges
/// them in order until `target_errors` is reached. `block(b, n)` returns
/// the error count of `n` trials from block `b`.
pub fn run_blocks<F>(max_trials: u64, target_errors: u64, wave: usize, block: F) -> (u64, u64)
where
    F: Fn(u64, u64) -> u64 + Sync,
{
    let n_blocks = max_trials.div_ceil(BLOCK_TRIALS);
    let wave = wave.max(1) as u64;
    let (mut trials, mut errors) = (0u64, 0u64);
    let mut next = 0u64;
    while next < n_blocks && errors < target_errors {
        let end = (next + wave).min(n_blocks);
        let results: Vec<(u64, u64)> = (next as usize..end as usize)
            .into_par_iter()
            .map(|b| {
                let b = b as u64;
                let n = BLOCK_TRIALS.min(max_trials - b * BLOCK_TRIALS);
                (n, block(b, n))
            })
            .collect();
        for (n, e) in results {
            if errors >= target_errors {
                break;
            }
            trials += n;
            errors += e;
        }
        next = end;
    }
    (trials, errors)
}

pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Fixed bit interleaver for a given coded length.
pub fn interleaver(len: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(&mut substream(0x1_7E71_EA7E, &[len as u64]));
    p
}

/// Per-packet channel state: one gain and one estimate per coherence tile.
struct Draw {
    gains: Vec<Complex64>,
    estimates: Vec<ChannelEstimate>,
}

struct TrialContext<'a> {
    codec: &'a Codec,
    channel: &'a LinkChannelConfig,
    noise_variance: f64,
    /// Tile of each resource element.
    re_tile: Vec<usize>,
    n_tiles: usize,
    perm: Vec<usize>,
}

impl<'a> TrialContext<'a> {
    fn new(codec: &'a Codec, channel: &'a LinkChannelConfig, snr_db: f64) -> Self {
        let n_re = codec.n_res();
        let rbs = channel.n_rbs;
        let tile_rbs = channel.coherence.coherence_rbs.unwrap_or(rbs);
        let n_tiles = channel.coherence.n_tiles(rbs);
        // Packet REs are spread evenly over the band.
        let re_tile = (0..n_re).map(|j| ((j * rbs / n_re) / tile_rbs).min(n_tiles - 1)).collect();
        let coded = match codec {
            Codec::Svc(_) => 0,
            Codec::Cc(c) => c.coded_len(),
            Codec::Polar(c) => c.coded_len(),
        };
        Self {
            codec,
            channel,
            noise_variance: 1.0 / db_to_linear(snr_db),
            re_tile,
            n_tiles,
            perm: interleaver(coded),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Draw {
        let nv = self.noise_variance;
        let gains: Vec<Complex64> = (0..self.n_tiles)
            .map(|_| match self.channel.fading {
                Fading::BlockRayleigh => complex_gaussian(rng, 1.0),
                Fading::Awgn => Complex64::new(1.0, 0.0),
            })
            .collect();
        let estimates = gains
            .iter()
            .map(|&h| match self.channel.receiver {
                Receiver::Genie => ChannelEstimate {
                    h_hat: h,
                    error_variance: 0.0,
                },
                Receiver::Estimated => {
                    let y = observe_pilots(h, nv, self.channel.dmrs_density.res_per_rb(), rng);
                    estimate_channel(&y, nv).expect("pilot count is positive")
                }
            })
            .collect();
        Draw { gains, estimates }
    }

    fn transmit(&self, x: &[Complex64], draw: &Draw, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        x.iter()
            .zip(&self.re_tile)
            .map(|(s, &t)| draw.gains[t] * s + complex_gaussian(rng, self.noise_variance))
            .collect()
    }

    /// Returns true on a packet error.
    fn trial(&self, rng: &mut ChaCha8Rng) -> bool {
        let payload: Vec<u8> = (0..self.codec.payload_len()).map(|_| rng.random::<u8>() & 1).collect();
        match self.codec {
            Codec::Svc(c) => {
                let x = c.encode(&payload).expect("payload length matches codec");
                let draw = self.draw(rng);
                let y = self.transmit(&x, &draw, rng);
                let h: Vec<Complex64> = self.re_tile.iter().map(|&t| draw.estimates[t].h_hat).collect();
                let (_, r) = c.decode(&y, &h, self.noise_variance);
                !r.success || r.bits != payload
            }
            Codec::Cc(c) => {
                let r = c.decode(&self.bit_channel(&c.encode(&payload), rng));
                !r.success || r.bits != payload
            }
            Codec::Polar(c) => {
                let r = c.decode(&self.bit_channel(&c.encode(&payload), rng));
                !r.success || r.bits != payload
            }
        }
    }

    /// Interleave, QPSK-map, send, equalize, demap and de-interleave.
    fn bit_channel(&self, coded: &[u8], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut bits = vec![0u8; coded.len() + coded.len() % 2];
        for (i, &p) in self.perm.iter().enumerate() {
            bits[p] = coded[i];
        }
        let x = Modulation::Qpsk.modulate(&bits);
        let draw = self.draw(rng);
        let y = self.transmit(&x, &draw, rng);
        let est: Vec<ChannelEstimate> = self.re_tile.iter().map(|&t| draw.estimates[t]).collect();
        let eq = mmse_equalize(&y, &est, self.noise_variance);
        let nv: Vec<f64> = eq.post_snr.iter().map(|&g| 1.0 / g.max(1e-12)).collect();
        let mut llr = Vec::new();
        Modulation::Qpsk.demodulate(&eq.symbols, &nv, &mut llr);
        self.perm.iter().map(|&p| llr[p]).collect()
    }
}

/// Runs every SNR point of the campaign on `workers` threads.
pub fn run_link_campaign(c: &LinkCampaign, workers: usize) -> Result<PerCurve> {
    c.validate()?;
    let codec = c.codec.build()?;
    let wave = 2 * workers.max(1);
    let points = with_workers(workers, || {
        c.snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                let ctx = TrialContext::new(&codec, &c.channel, snr);
                let (trials, errors) = run_blocks(c.max_trials, c.target_errors, wave, |b, n| {
                    let mut rng = substream(c.seed, &[i as u64, b]);
                    (0..n).filter(|_| ctx.trial(&mut rng)).count() as u64
                });
                PerPoint::new(snr, trials, errors, c.target_errors)
            })
            .collect()
    })?;
    Ok(PerCurve {
        codec: c.codec.id().to_string(),
        points,
    })
}

/// SNR at which the curve crosses `target_per`, by linear interpolation of
/// `log10(per)` between the two bracketing points. Both bracketing points
/// must have a non-zero PER; extrapolation is refused.
pub fn snr_at_per(curve: &PerCurve, target_per: f64) -> Result<f64> {
    if !(target_per > 0.0 && target_per < 1.0) {
        return Err(Error::Domain(format!("target PER {target_per} outside (0, 1)")));
    }
    let pts = &curve.points;
    if let Some(p) = pts.iter().find(|p| p.per == target_per) {
        return Ok(p.snr_db);
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.per > target_per && b.per < target_per {
            if b.per == 0.0 {
                break;
            }
            let (la, lb, lt) = (a.per.log10(), b.per.log10(), target_per.log10());
            return Ok(a.snr_db + (lt - la) / (lb - la) * (b.snr_db - a.snr_db));
        }
    }
    Err(Error::Domain(format!(
        "PER {target_per:e} is not bracketed by non-zero points of the {} curve",
        curve.codec
    )))
}

/// Pool-adjacent-violators fit of a non-increasing sequence with weights.
pub fn isotonic_non_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // Each block: (weighted mean, total weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w.max(1e-12), 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m2 <= m1 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, n)| std::iter::repeat_n(m, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// MCS indices for eMBB codeblocks.
    pub mcs: Vec<u8>,
    /// eMBB codeblock lengths in bits, CRC included.
    pub cb_lens: Vec<usize>,
    /// URLLC packet length in bits, CRC included, calibrated for the control MCS.
    pub urllc_cb_len: usize,
    pub snr_step_db: f64,
    pub max_points: usize,
    pub max_trials: u64,
    pub target_errors: u64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mcs: vec![0, 1, 2, 3],
            cb_lens: vec![512, 1024, 2048],
            urllc_cb_len: 32 + crc::CRC_LEN,
            snr_step_db: 0.25,
            max_points: 60,
            max_trials: 20_000,
            target_errors: 200,
            seed: 0xB1E5_CA11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBlerPoint {
    pub mcs: u8,
    pub cb_len: usize,
    pub snr_db: f64,
    pub trials: u64,
    pub errors: u64,
}

/// Codeblock over AWGN: CRC-16 attached, tail-biting convolutional code at the
/// MCS rate, Gray mapping, max-log demapping, Viterbi decoding.
pub struct CodeblockLink {
    mcs: Mcs,
    code: ConvCode,
    cb_len: usize,
}

impl CodeblockLink {
    pub fn new(mcs: Mcs, cb_len: usize) -> Result<Self> {
        if cb_len <= crc::CRC_LEN {
            return Err(Error::Domain(format!("codeblock of {cb_len} bits leaves no room for data")));
        }
        Ok(Self {
            mcs,
            code: ConvCode::new(mcs.rate),
            cb_len,
        })
    }

    /// Returns true on a block error.
    pub fn trial(&self, snr_db: f64, rng: &mut ChaCha8Rng) -> bool {
        let data: Vec<u8> = (0..self.cb_len - crc::CRC_LEN).map(|_| rng.random::<u8>() & 1).collect();
        let block = crc::attach(&data);
        let mut coded = self.code.encode(&block);
        let n = coded.len();
        let bps = self.mcs.modulation.bits_per_symbol();
        coded.resize(n.div_ceil(bps) * bps, 0);
        let nv = 1.0 / db_to_linear(snr_db);
        let y: Vec<Complex64> = self
            .mcs
            .modulation
            .modulate(&coded)
            .into_iter()
            .map(|s| s + complex_gaussian(rng, nv))
            .collect();
        let mut llr = Vec::new();
        self.mcs.modulation.demodulate(&y, &vec![nv; y.len()], &mut llr);
        llr.truncate(n);
        let (dec, _) = self.code.decode_bits(&llr, self.cb_len);
        !crc::check(&dec) || dec != block
    }
}

/// Monte Carlo BLER of one `(mcs, cb_len, snr)` point.
pub fn simulate_bler_point(
    mcs: u8,
    cb_len: usize,
    snr_db: f64,
    max_trials: u64,
    target_errors: u64,
    seed: u64,
    workers: usize,
) -> Result<(u64, u64)> {
    let link = CodeblockLink::new(Mcs::by_index(mcs)?, cb_len)?;
    let label = snr_db.to_bits();
    with_workers(workers, || {
        run_blocks(max_trials, target_errors, 2 * workers.max(1), |b, n| {
            let mut rng = substream(seed, &[mcs as u64, cb_len as u64, label, b]);
            (0..n).filter(|_| link.trial(snr_db, &mut rng)).count() as u64
        })
    })
}

/// Sweeps each `(mcs, cb_len)` entry upward from just below its capacity
/// limit until a point shows no errors, smooths each curve with isotonic
/// regression and returns the table together with the raw counts.
pub fn calibrate_bler_table(cfg: &CalibrationConfig, workers: usize) -> Result<(BlerTable, Vec<RawBlerPoint>)> {
    if !(cfg.snr_step_db > 0.0) || cfg.max_points == 0 || cfg.target_errors == 0 || cfg.max_trials < cfg.target_errors {
        return Err(Error::Config("invalid calibration sweep settings".into()));
    }
    let mut entries: Vec<(u8, usize)> = vec![(URLLC_MCS.index, cfg.urllc_cb_len)];
    for &m in &cfg.mcs {
        Mcs::by_index(m)?;
        for &cb in &cfg.cb_lens {
            if !entries.contains(&(m, cb)) {
                entries.push((m, cb));
            }
        }
    }
    let mut table = BlerTable::new();
    let mut raw = Vec::new();
    for (mcs, cb) in entries {
        let m = Mcs::by_index(mcs)?;
        let limit_db = 10.0 * (m.bits_per_re().exp2() - 1.0).log10();
        let start = ((limit_db - 1.0) / cfg.snr_step_db).floor() * cfg.snr_step_db;
        let mut snrs = Vec::new();
        let mut counts = Vec::new();
        for p in 0..cfg.max_points {
            let snr = start + p as f64 * cfg.snr_step_db;
            let (t, e) = simulate_bler_point(mcs, cb, snr, cfg.max_trials, cfg.target_errors, cfg.seed, workers)?;
            raw.push(RawBlerPoint {
                mcs,
                cb_len: cb,
                snr_db: snr,
                trials: t,
                errors: e,
            });
            snrs.push(snr);
            counts.push((t, e));
            if e == 0 {
                break;
            }
        }
        let values: Vec<f64> = counts.iter().map(|&(t, e)| e as f64 / t as f64).collect();
        let weights: Vec<f64> = counts.iter().map(|&(t, _)| t as f64).collect();
        let smooth = isotonic_non_increasing(&values, &weights);
        table.insert(mcs, cb, BlerCurve::new(snrs, smooth)?);
    }
    Ok((table, raw))
}
