//! Block-fading channel, pilot-based channel estimation, scalar MMSE
//! equalization and the effective-SNR to BLER link abstraction.
//!
//! The low-mobility pedestrian channel is abstracted as block Rayleigh
//! fading: one complex gain per tile of `coherence_rbs` resource blocks,
//! constant over `coherence_slots` slots.

mod bler;
mod estimation;

pub use bler::{BlerCurve, BlerTable, Mcs, BLER_SCHEMA, MCS_TABLE, URLLC_MCS};
pub use estimation::{estimate_channel, mmse_equalize, observe_pilots, ChannelEstimate, DmrsDensity, Equalized};

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceConfig {
    /// Coherence bandwidth in RBs; `None` means flat over the whole band.
    pub coherence_rbs: Option<usize>,
    /// Coherence time in slots.
    pub coherence_slots: u64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            coherence_rbs: Some(25),
            coherence_slots: 1,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coherence_rbs == Some(0) {
            return Err(Error::Config("coherence_rbs must be positive".into()));
        }
        if self.coherence_slots == 0 {
            return Err(Error::Config("coherence_slots must be positive".into()));
        }
        Ok(())
    }

    pub fn n_tiles(&self, n_rbs: usize) -> usize {
        match self.coherence_rbs {
            Some(c) => n_rbs.div_ceil(c).max(1),
            None => 1,
        }
    }
}

/// One coherence period of a user's channel across the band.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub coherence_block_gains: Vec<Complex64>,
    pub noise_variance: f64,
    pub seed: u64,
    tile_rbs: usize,
}

impl ChannelRealization {
    pub fn tile_of(&self, rb: usize) -> usize {
        (rb / self.tile_rbs).min(self.coherence_block_gains.len() - 1)
    }

    pub fn gain(&self, rb: usize) -> Complex64 {
        self.coherence_block_gains[self.tile_of(rb)]
    }

    /// Per-RE SNR (linear) of each tile.
    pub fn tile_snrs(&self) -> impl Iterator<Item = f64> + '_ {
        self.coherence_block_gains
            .iter()
            .map(|h| h.norm_sqr() / self.noise_variance)
    }

    pub fn n_tiles(&self) -> usize {
        self.coherence_block_gains.len()
    }

    pub fn tile_rbs(&self) -> usize {
        self.tile_rbs
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Circularly-symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws unit-mean-power Rayleigh gains for every tile of an `n_rbs` band.
/// The noise variance is set so that the average per-RE SNR equals
/// `geometry_snr_db`.
pub fn realize_channel(seed: u64, geometry_snr_db: f64, n_rbs: usize, cfg: &CoherenceConfig) -> ChannelRealization {
    let mut rng = crate::rng::substream(seed, &[0x4348_414E]);
    let tiles = cfg.n_tiles(n_rbs);
    ChannelRealization {
        coherence_block_gains: (0..tiles).map(|_| complex_gaussian(&mut rng, 1.0)).collect(),
        noise_variance: 1.0 / db_to_linear(geometry_snr_db),
        seed,
        tile_rbs: cfg.coherence_rbs.unwrap_or(n_rbs.max(1)),
    }
}

/// Mutual-information effective SNR with the Gaussian-input capacity
/// mapping: the SNR of the AWGN channel whose capacity equals the mean
/// capacity over `snrs` (all linear).
pub fn effective_snr(snrs: &[f64]) -> f64 {
    if snrs.is_empty() {
        return 0.0;
    }
    let mi = snrs.iter().map(|&g| (1.0 + g).log2()).sum::<f64>() / snrs.len() as f64;
    mi.exp2() - 1.0
}

/// Weighted version of [`effective_snr`]; weights need not be normalized.
pub fn effective_snr_weighted(snrs: &[(f64, f64)]) -> f64 {
    let w: f64 = snrs.iter().map(|&(_, w)| w).sum();
    if w <= 0.0 {
        return 0.0;
    }
    let mi = snrs.iter().map(|&(g, w)| w * (1.0 + g).log2()).sum::<f64>() / w;
    mi.exp2() - 1.0
}
