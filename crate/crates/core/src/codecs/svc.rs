//! Sparse vector coding.
//!
//! Information is carried by the support of a `k`-sparse vector `s` of length
//! `n`; the transmit vector is `x = a · C s` where `C` is an `m x n` spreading
//! dictionary with unit-norm complex Gaussian columns and `a = sqrt(m / k)`
//! sets the average energy per resource element to one. The receiver knows
//! `k` and recovers the support with `k` iterations of orthogonal matching
//! pursuit (OMP). Because every non-zero entry of `s` is `+1`, atoms are
//! ranked by the real part of their normalized correlation with the
//! residual rather than its magnitude; the residual update is the usual
//! least-squares projection onto the selected atoms.

use super::combinatorics::{svc_capacity, BinomialTable};
use super::CodecResult;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcParams {
    /// Dictionary size (length of the sparse vector).
    pub n: usize,
    /// Spread length (resource elements per codeword).
    pub m: usize,
    /// Sparsity.
    pub k: usize,
    pub spreading_seed: u64,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            n: 92,
            m: 42,
            k: 2,
            spreading_seed: 0x5EC0_DE5E_ED00_0001,
        }
    }
}

impl SvcParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Domain("sparsity k must be at least 1".into()));
        }
        if self.k > self.n {
            return Err(Error::Domain(format!("sparsity k={} exceeds n={}", self.k, self.n)));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::Domain(format!("spread length m={} must satisfy 0 < m < n={}", self.m, self.n)));
        }
        if svc_capacity(self.n, self.k)? < 1 {
            return Err(Error::Domain("C(n,k) carries less than one bit".into()));
        }
        Ok(())
    }

    pub fn capacity_bits(&self) -> Result<u32> {
        svc_capacity(self.n, self.k)
    }
}

/// Column-major `m x n` dictionary with unit-norm columns.
pub fn spreading_matrix(m: usize, n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = crate::rng::substream(seed, &[0x5350_5245_4144]);
    let mut cols = Vec::with_capacity(m * n);
    for _ in 0..n {
        let col: Vec<Complex64> = (0..m)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        cols.extend(col.into_iter().map(|c| c / norm));
    }
    cols
}

pub fn bits_to_index(bits: &[u8]) -> u128 {
    bits.iter().fold(0u128, |acc, &b| (acc << 1) | (b & 1) as u128)
}

pub fn index_to_bits(index: u128, len: usize) -> Vec<u8> {
    (0..len).rev().map(|i| ((index >> i) & 1) as u8).collect()
}

#[derive(Debug, Clone)]
pub struct SvcCodec {
    params: SvcParams,
    payload_len: usize,
    dictionary: Vec<Complex64>,
    table: BinomialTable,
    amplitude: f64,
}

impl SvcCodec {
    pub fn new(params: SvcParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            payload_len: params.capacity_bits()? as usize,
            dictionary: spreading_matrix(params.m, params.n, params.spreading_seed),
            table: BinomialTable::new(params.n, params.k)?,
            amplitude: (params.m as f64 / params.k as f64).sqrt(),
            params,
        })
    }

    pub fn params(&self) -> &SvcParams {
        &self.params
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    /// Unscaled dictionary column `i`.
    pub fn column(&self, i: usize) -> &[Complex64] {
        let m = self.params.m;
        &self.dictionary[i * m..(i + 1) * m]
    }

    pub fn support_of(&self, payload: &[u8]) -> Result<Vec<usize>> {
        if payload.len() != self.payload_len {
            return Err(Error::Domain(format!(
                "payload has {} bits, code carries {}",
                payload.len(),
                self.payload_len
            )));
        }
        self.table.index_to_support(bits_to_index(payload))
    }

    /// Codeword of length `m`: the scaled sum of the selected columns.
    pub fn encode(&self, payload: &[u8]) -> Result<Vec<Complex64>> {
        let support = self.support_of(payload)?;
        let mut x = vec![Complex64::new(0.0, 0.0); self.params.m];
        for &p in &support {
            for (xi, c) in x.iter_mut().zip(self.column(p)) {
                *xi += c * self.amplitude;
            }
        }
        Ok(x)
    }

    /// OMP with exactly `k` iterations over the effective dictionary
    /// `diag(channel) · a · C`. `noise_variance` is accepted for interface
    /// symmetry with the coherent decoders; greedy selection does not need it.
    /// The returned support always has exactly `k` distinct positions.
    pub fn decode(&self, received: &[Complex64], channel: &[Complex64], _noise_variance: f64) -> (Vec<usize>, CodecResult) {
        let (m, n, k) = (self.params.m, self.params.n, self.params.k);
        assert_eq!(received.len(), m, "received length");
        assert_eq!(channel.len(), m, "channel length");

        let mut atoms = Vec::with_capacity(m * n);
        let mut inv_norm = vec![0.0; n];
        for (i, inv) in inv_norm.iter_mut().enumerate() {
            let mut e = 0.0;
            for (c, h) in self.column(i).iter().zip(channel) {
                let a = c * h * self.amplitude;
                e += a.norm_sqr();
                atoms.push(a);
            }
            *inv = if e > 0.0 { 1.0 / e.sqrt() } else { 0.0 };
        }
        let atom = |i: usize| &atoms[i * m..(i + 1) * m];

        let mut residual = received.to_vec();
        let mut support: Vec<usize> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for i in 0..n {
                if support.contains(&i) {
                    continue;
                }
                let corr: Complex64 = atom(i).iter().zip(&residual).map(|(a, r)| a.conj() * r).sum();
                let score = corr.re * inv_norm[i];
                if score > best.1 {
                    best = (i, score);
                }
            }
            let pick = if best.0 == usize::MAX {
                (0..n).find(|i| !support.contains(i)).expect("k <= n")
            } else {
                best.0
            };
            support.push(pick);
            let coef = least_squares(&support.iter().map(|&i| atom(i)).collect::<Vec<_>>(), received);
            residual.copy_from_slice(received);
            for (&i, z) in support.iter().zip(&coef) {
                for (r, a) in residual.iter_mut().zip(atom(i)) {
                    *r -= a * z;
                }
            }
        }
        let residual_norm = residual.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt();
        support.sort_unstable();
        let index = self
            .table
            .support_to_index(&support)
            .expect("OMP support is k distinct in-range positions");
        let valid = index < (1u128 << self.payload_len);
        let result = CodecResult {
            bits: index_to_bits(index, self.payload_len),
            success: valid,
            metric: residual_norm,
        };
        (support, result)
    }
}

/// Solves `min_z || y - A z ||` for a handful of columns via the normal
/// equations and Gaussian elimination with partial pivoting.
fn least_squares(cols: &[&[Complex64]], y: &[Complex64]) -> Vec<Complex64> {
    let k = cols.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut g = vec![vec![zero; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            g[r][c] = cols[r].iter().zip(cols[c]).map(|(a, b)| a.conj() * b).sum();
        }
        g[r][k] = cols[r].iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    }
    for p in 0..k {
        let piv = (p..k)
            .max_by(|&a, &b| g[a][p].norm_sqr().total_cmp(&g[b][p].norm_sqr()))
            .unwrap_or(p);
        g.swap(p, piv);
        let d = g[p][p];
        if d.norm_sqr() == 0.0 {
            continue;
        }
        for r in 0..k {
            if r != p {
                let f = g[r][p] / d;
                for c in p..=k {
                    let v = g[p][c];
                    g[r][c] -= f * v;
                }
            }
        }
    }
    (0..k)
        .map(|r| if g[r][r].norm_sqr() == 0.0 { zero } else { g[r][k] / g[r][r] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_columns_are_unit_norm_and_seeded() {
        let a = spreading_matrix(42, 92, 1);
        let b = spreading_matrix(42, 92, 1);
        let c = spreading_matrix(42, 92, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for col in a.chunks(42) {
            let norm: f64 = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(SvcParams::default().validate().is_ok());
        let bad = SvcParams { k: 93, ..SvcParams::default() };
        assert!(matches!(bad.validate(), Err(Error::Domain(_))));
        let bad = SvcParams { m: 92, ..SvcParams::default() };
        assert!(bad.validate().is_err());
        let bad = SvcParams { k: 0, ..SvcParams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_column_code_emits_that_column() {
        let p = SvcParams { n: 2, m: 1, k: 1, spreading_seed: 4 };
        let codec = SvcCodec::new(p).unwrap();
        assert_eq!(codec.payload_len(), 1);
        for bit in 0..2u8 {
            let x = codec.encode(&[bit]).unwrap();
            assert_eq!(x.len(), 1);
            let c = codec.column(bit as usize)[0];
            assert!((x[0] - c).norm() < 1e-15);
        }
    }

    #[test]
    fn least_squares_recovers_exact_combination() {
        let d = spreading_matrix(6, 3, 8);
        let cols: Vec<&[Complex64]> = d.chunks(6).collect();
        let truth = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25), Complex64::new(-1.0, 0.0)];
        let y: Vec<Complex64> = (0..6).map(|r| (0..3).map(|c| cols[c][r] * truth[c]).sum()).collect();
        let z = least_squares(&cols, &y);
        for (a, b) in z.iter().zip(truth.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn wrong_payload_length_is_rejected() {
        let codec = SvcCodec::new(SvcParams::default()).unwrap();
        assert!(codec.encode(&[0; 11]).is_err());
    }
}
