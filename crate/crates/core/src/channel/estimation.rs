//! Pilot-based LMMSE channel estimation and scalar MMSE equalization.

use super::complex_gaussian;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// DMRS resource elements per resource block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum DmrsDensity {
    #[default]
    Single,
    Double,
}

impl DmrsDensity {
    pub fn res_per_rb(self) -> usize {
        match self {
            DmrsDensity::Single => 12,
            DmrsDensity::Double => 24,
        }
    }

    /// Whole OFDM symbols taken by DMRS in a slot.
    pub fn symbols(self) -> usize {
        self.res_per_rb() / crate::frame::SUBCARRIERS_PER_RB
    }
}

impl TryFrom<u32> for DmrsDensity {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        match v {
            12 => Ok(DmrsDensity::Single),
            24 => Ok(DmrsDensity::Double),
            other => Err(Error::Config(format!("dmrs_density must be 12 or 24, got {other}"))),
        }
    }
}

impl From<DmrsDensity> for u32 {
    fn from(d: DmrsDensity) -> u32 {
        d.res_per_rb() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: Complex64,
    /// Mean squared estimation error `E|h - h_hat|^2`.
    pub error_variance: f64,
}

/// Unit pilots seen through gain `h` with complex noise of variance `noise_variance`.
pub fn observe_pilots<R: Rng + ?Sized>(h: Complex64, noise_variance: f64, n_pilots: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n_pilots)
        .map(|_| h + complex_gaussian(rng, noise_variance))
        .collect()
}

/// LMMSE estimate of a unit-variance Rayleigh gain from unit-pilot
/// observations: `h_hat = sum(y) / (N + sigma^2)`, error variance
/// `sigma^2 / (N + sigma^2) = 1 / (1 + N * SNR)`.
pub fn estimate_channel(observed: &[Complex64], noise_variance: f64) -> Result<ChannelEstimate> {
    if observed.is_empty() {
        return Err(Error::Domain("channel estimation needs at least one pilot".into()));
    }
    let n = observed.len() as f64;
    let sum: Complex64 = observed.iter().sum();
    let denom = n + noise_variance;
    Ok(ChannelEstimate {
        h_hat: sum / denom,
        error_variance: noise_variance / denom,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// Bias-corrected symbol estimates.
    pub symbols: Vec<Complex64>,
    /// Post-equalization SNR per symbol (linear).
    pub post_snr: Vec<f64>,
}

/// Per-symbol scalar MMSE equalizer that treats the estimation error as
/// extra noise. The MMSE output is rescaled to be unbiased, so the returned
/// symbols are `x + n'` with `E|n'|^2 = 1 / post_snr`.
pub fn mmse_equalize(received: &[Complex64], estimates: &[ChannelEstimate], noise_variance: f64) -> Equalized {
    assert_eq!(received.len(), estimates.len(), "received/estimate length mismatch");
    let mut symbols = Vec::with_capacity(received.len());
    let mut post_snr = Vec::with_capacity(received.len());
    for (y, e) in received.iter().zip(estimates) {
        let g = e.h_hat.norm_sqr();
        let disturbance = e.error_variance + noise_variance;
        if g == 0.0 {
            symbols.push(Complex64::new(0.0, 0.0));
            post_snr.push(0.0);
            continue;
        }
        let w = e.h_hat.conj() / (g + disturbance);
        let bias = g / (g + disturbance);
        symbols.push(w * y / bias);
        post_snr.push(if disturbance > 0.0 { g / disturbance } else { f64::INFINITY });
    }
    Equalized { symbols, post_snr }
}
