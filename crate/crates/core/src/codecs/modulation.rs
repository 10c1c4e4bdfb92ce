//! Gray-mapped QPSK and 16QAM with unit average energy, and max-log LLRs.
//!
//! LLR sign convention: positive favours bit 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    /// Per-dimension amplitude levels indexed by the Gray label of that dimension.
    fn levels(self) -> &'static [(u8, f64)] {
        const QPSK: [(u8, f64); 2] = [(0, 1.0), (1, -1.0)];
        // (sign bit, magnitude bit): 00 -> +1, 01 -> +3, 10 -> -1, 11 -> -3
        const QAM16: [(u8, f64); 4] = [(0b00, 1.0), (0b01, 3.0), (0b10, -1.0), (0b11, -3.0)];
        match self {
            Modulation::Qpsk => &QPSK,
            Modulation::Qam16 => &QAM16,
        }
    }

    fn scale(self) -> f64 {
        match self {
            Modulation::Qpsk => std::f64::consts::FRAC_1_SQRT_2,
            Modulation::Qam16 => 1.0 / 10f64.sqrt(),
        }
    }

    /// Maps bits to symbols. `bits.len()` must be a multiple of `bits_per_symbol`.
    pub fn modulate(self, bits: &[u8]) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        assert_eq!(bits.len() % bps, 0, "bit count not a multiple of {bps}");
        let s = self.scale();
        bits.chunks(bps)
            .map(|c| match self {
                Modulation::Qpsk => Complex64::new(
                    s * (1.0 - 2.0 * c[0] as f64),
                    s * (1.0 - 2.0 * c[1] as f64),
                ),
                Modulation::Qam16 => {
                    // I from (b0, b2), Q from (b1, b3)
                    let i = (1.0 - 2.0 * c[0] as f64) * (1.0 + 2.0 * c[2] as f64);
                    let q = (1.0 - 2.0 * c[1] as f64) * (1.0 + 2.0 * c[3] as f64);
                    Complex64::new(s * i, s * q)
                }
            })
            .collect()
    }

    /// Max-log LLRs for a unit-gain observation with complex noise variance
    /// `noise_var` (i.e. SNR `1 / noise_var`).
    pub fn demodulate(self, symbols: &[Complex64], noise_var: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let s = self.scale();
        let levels = self.levels();
        for (z, &nv) in symbols.iter().zip(noise_var) {
            // Per real dimension the noise variance is nv / 2.
            let inv = 1.0 / nv.max(1e-300);
            let per_dim_bits = self.bits_per_symbol() / 2;
            for comp in [z.re, z.im] {
                let mut llr = [0.0f64; 2];
                for (b, slot) in llr.iter_mut().enumerate().take(per_dim_bits) {
                    let shift = per_dim_bits - 1 - b;
                    let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                    for &(label, a) in levels {
                        let d = (comp - s * a).powi(2);
                        if (label >> shift) & 1 == 0 {
                            d0 = d0.min(d);
                        } else {
                            d1 = d1.min(d);
                        }
                    }
                    *slot = (d1 - d0) * inv;
                }
                out.extend_from_slice(&llr[..per_dim_bits]);
            }
        }
        // Reorder per symbol from [I-bits.., Q-bits..] to the interleaved
        // labelling used by `modulate` (b0=I sign, b1=Q sign, b2=I mag, b3=Q mag).
        if self == Modulation::Qam16 {
            for chunk in out.chunks_mut(4) {
                let (i0, i1, q0, q1) = (chunk[0], chunk[1], chunk[2], chunk[3]);
                chunk.copy_from_slice(&[i0, q0, i1, q1]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_average_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let bps = m.bits_per_symbol();
            let all: Vec<u8> = (0..1u32 << bps)
                .flat_map(|v| (0..bps).map(move |i| ((v >> i) & 1) as u8))
                .collect();
            let syms = m.modulate(&all);
            let e: f64 = syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{m:?}: {e}");
        }
    }

    #[test]
    fn noiseless_hard_decisions_recover_bits() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let bps = m.bits_per_symbol();
            let bits: Vec<u8> = (0..1u32 << bps)
                .flat_map(|v| (0..bps).map(move |i| ((v >> i) & 1) as u8))
                .collect();
            let syms = m.modulate(&bits);
            let mut llr = Vec::new();
            m.demodulate(&syms, &vec![0.1; syms.len()], &mut llr);
            let hard: Vec<u8> = llr.iter().map(|&l| (l < 0.0) as u8).collect();
            assert_eq!(hard, bits, "{m:?}");
        }
    }

    #[test]
    fn qpsk_llr_is_linear() {
        let z = [Complex64::new(0.3, -0.2)];
        let mut llr = Vec::new();
        Modulation::Qpsk.demodulate(&z, &[0.5], &mut llr);
        // max-log is exact for QPSK: 2*sqrt(2)*x/nv
        let k = 2.0 * 2f64.sqrt() / 0.5;
        assert!((llr[0] - k * 0.3).abs() < 1e-12);
        assert!((llr[1] + k * 0.2).abs() < 1e-12);
    }
}
