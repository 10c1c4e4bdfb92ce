//! Polar code with natural-order generator `x = u · F^{⊗n}`, `F = [[1,0],[1,1]]`.
//!
//! Construction uses Gaussian-approximation density evolution at a design SNR.
//! Rate matching to `E < N` coded bits punctures the first `N - E` coded
//! positions; the matching `u_0 .. u_{N-E-1}` only touch punctured positions
//! and are therefore always frozen. Decoding is successive cancellation list
//! (SCL) with min-sum node updates and the usual approximate path metric;
//! [`PolarCodec`] adds CRC-aided path selection.

use super::crc;
use super::CodecResult;
use crate::error::{Error, Result};

/// Chung's approximation of `1 - E[tanh(L/2)]` for `L ~ N(m, 2m)`.
fn phi(m: f64) -> f64 {
    if m <= 0.0 {
        1.0
    } else if m < 10.0 {
        (-0.4527 * m.powf(0.86) + 0.0218).exp()
    } else {
        (std::f64::consts::PI / m).sqrt() * (-m / 4.0).exp() * (1.0 - 10.0 / (7.0 * m))
    }
}

fn phi_inv(y: f64) -> f64 {
    if y >= 1.0 {
        return 0.0;
    }
    // phi is decreasing; bisect on a bracket that covers every double y > 0.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while phi(hi) > y {
        hi *= 2.0;
        if hi > 1e6 {
            return hi;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR of each synthetic channel `u_i` given channel means, natural order.
pub fn ga_bit_channel_means(channel: &[f64]) -> Vec<f64> {
    let n = channel.len();
    if n == 1 {
        return channel.to_vec();
    }
    let h = n / 2;
    let (a, b) = channel.split_at(h);
    let check: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| phi_inv(1.0 - (1.0 - phi(x)) * (1.0 - phi(y))))
        .collect();
    let var: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x + y).collect();
    let mut out = ga_bit_channel_means(&check);
    out.extend(ga_bit_channel_means(&var));
    out
}

/// In-place `x = u · F^{⊗n}` over GF(2).
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut h = 1;
    while h < n {
        for block in bits.chunks_mut(2 * h) {
            let (left, right) = block.split_at_mut(h);
            for (l, r) in left.iter_mut().zip(right.iter()) {
                *l ^= *r;
            }
        }
        h *= 2;
    }
}

#[inline]
fn f_node(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn g_node(a: f64, b: f64, c: u8) -> f64 {
    if c == 0 {
        b + a
    } else {
        b - a
    }
}

#[derive(Debug, Clone)]
pub struct PolarCode {
    n_log: usize,
    k: usize,
    e: usize,
    frozen: Vec<bool>,
    info_positions: Vec<usize>,
}

impl PolarCode {
    /// `k` information bits (including any CRC), `e` transmitted bits,
    /// mother length the smallest power of two `>= e`.
    pub fn new(k: usize, e: usize, design_snr_db: f64) -> Result<Self> {
        if k == 0 || k > e {
            return Err(Error::Config(format!("polar code needs 0 < k <= e, got k={k}, e={e}")));
        }
        let n = e.next_power_of_two();
        let n_log = n.trailing_zeros() as usize;
        let punctured = n - e;
        if k > n - punctured {
            return Err(Error::Config("too few capable positions".into()));
        }
        let snr = 10f64.powf(design_snr_db / 10.0);
        let channel: Vec<f64> = (0..n).map(|j| if j < punctured { 0.0 } else { 2.0 * snr }).collect();
        let means = ga_bit_channel_means(&channel);
        let mut order: Vec<usize> = (punctured..n).collect();
        // Most reliable first; ties broken by the higher index.
        order.sort_by(|&x, &y| means[y].total_cmp(&means[x]).then(y.cmp(&x)));
        let mut info_positions: Vec<usize> = order[..k].to_vec();
        info_positions.sort_unstable();
        let mut frozen = vec![true; n];
        for &p in &info_positions {
            frozen[p] = false;
        }
        Ok(Self {
            n_log,
            k,
            e,
            frozen,
            info_positions,
        })
    }

    pub fn mother_len(&self) -> usize {
        1 << self.n_log
    }

    pub fn info_len(&self) -> usize {
        self.k
    }

    pub fn coded_len(&self) -> usize {
        self.e
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        assert_eq!(info.len(), self.k, "info length");
        let n = self.mother_len();
        let mut u = vec![0u8; n];
        for (&p, &b) in self.info_positions.iter().zip(info) {
            u[p] = b & 1;
        }
        polar_transform(&mut u);
        u[n - self.e..].to_vec()
    }

    /// SCL decode; returns up to `list` candidate information vectors, best
    /// path metric first.
    pub fn decode_list(&self, llr: &[f64], list: usize) -> Vec<(Vec<u8>, f64)> {
        assert_eq!(llr.len(), self.e, "LLR length");
        let n = self.mother_len();
        let n_log = self.n_log;
        let list = list.max(1);

        let mut root = ScPath::new(n);
        root.llr[n - self.e..n].copy_from_slice(llr);
        let mut paths = vec![root];
        let mut scratch = vec![0u8; n];
        let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * list);

        for i in 0..n {
            for p in paths.iter_mut() {
                p.update_llr(i, n_log);
            }
            if self.frozen[i] {
                for p in paths.iter_mut() {
                    let l = p.leaf();
                    if l < 0.0 {
                        p.metric += -l;
                    }
                    p.decide(i, 0, n_log, &mut scratch);
                }
                continue;
            }
            candidates.clear();
            for (pi, p) in paths.iter().enumerate() {
                let l = p.leaf();
                let (m0, m1) = if l >= 0.0 {
                    (p.metric, p.metric + l)
                } else {
                    (p.metric - l, p.metric)
                };
                candidates.push((m0, pi, 0));
                candidates.push((m1, pi, 1));
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            candidates.truncate(list);
            // Keep the parent order stable so the result is deterministic.
            candidates.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)));

            let mut uses = vec![0u8; paths.len()];
            for c in &candidates {
                uses[c.1] += 1;
            }
            let mut old: Vec<Option<ScPath>> = paths.drain(..).map(Some).collect();
            for &(metric, pi, bit) in &candidates {
                uses[pi] -= 1;
                let mut child = if uses[pi] == 0 {
                    old[pi].take().expect("parent consumed twice")
                } else {
                    old[pi].as_ref().expect("parent missing").clone()
                };
                child.metric = metric;
                child.decide(i, bit, n_log, &mut scratch);
                paths.push(child);
            }
        }

        let mut out: Vec<(Vec<u8>, f64)> = paths
            .into_iter()
            .map(|p| (self.info_positions.iter().map(|&q| p.u[q]).collect(), p.metric))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }
}

/// One SC decoding path: per-depth LLR buffers, left-child partial codewords
/// and decided bits.
#[derive(Debug, Clone)]
struct ScPath {
    /// Depth `d` occupies `[offset(d), offset(d) + (N >> d))`.
    llr: Vec<f64>,
    /// Codeword of the last completed left child at depth `d`, same layout.
    cw_left: Vec<u8>,
    u: Vec<u8>,
    metric: f64,
    n: usize,
}

impl ScPath {
    fn new(n: usize) -> Self {
        Self {
            llr: vec![0.0; 2 * n],
            cw_left: vec![0; 2 * n],
            u: vec![0; n],
            metric: 0.0,
            n,
        }
    }

    #[inline]
    fn offset(&self, d: usize) -> usize {
        // sum_{j<d} N >> j = 2N - 2(N >> d)
        2 * self.n - 2 * (self.n >> d)
    }

    fn leaf(&self) -> f64 {
        self.llr[2 * self.n - 2]
    }

    fn update_llr(&mut self, i: usize, n_log: usize) {
        let start = if i == 0 {
            0
        } else {
            // Switch from left to right child at the depth of the highest flipped bit.
            let dd = n_log - 1 - i.trailing_zeros() as usize;
            let h = self.n >> (dd + 1);
            let (src, dst, left) = (self.offset(dd), self.offset(dd + 1), self.offset(dd + 1));
            for j in 0..h {
                let v = g_node(self.llr[src + j], self.llr[src + h + j], self.cw_left[left + j]);
                self.llr[dst + j] = v;
            }
            dd + 1
        };
        for d in start..n_log {
            let h = self.n >> (d + 1);
            let (src, dst) = (self.offset(d), self.offset(d + 1));
            for j in 0..h {
                self.llr[dst + j] = f_node(self.llr[src + j], self.llr[src + h + j]);
            }
        }
    }

    fn decide(&mut self, i: usize, bit: u8, n_log: usize, scratch: &mut [u8]) {
        self.u[i] = bit;
        scratch[0] = bit;
        let mut len = 1;
        let mut d = n_log;
        while d > 0 {
            let choice = (i >> (n_log - d)) & 1;
            let base = self.offset(d);
            if choice == 0 {
                self.cw_left[base..base + len].copy_from_slice(&scratch[..len]);
                return;
            }
            // parent codeword = [left ^ right, right]
            scratch.copy_within(0..len, len);
            for j in 0..len {
                scratch[j] = self.cw_left[base + j] ^ scratch[len + j];
            }
            len *= 2;
            d -= 1;
        }
    }
}

/// Short-packet polar codec: payload plus CRC-16, CRC-aided list decoding.
#[derive(Debug, Clone)]
pub struct PolarCodec {
    code: PolarCode,
    payload_len: usize,
    list_size: usize,
}

impl PolarCodec {
    pub fn new(payload_len: usize, coded_len: usize, list_size: usize, design_snr_db: f64) -> Result<Self> {
        Ok(Self {
            code: PolarCode::new(payload_len + crc::CRC_LEN, coded_len, design_snr_db)?,
            payload_len,
            list_size,
        })
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn coded_len(&self) -> usize {
        self.code.coded_len()
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn encode(&self, payload: &[u8]) -> Vec<u8> {
        assert_eq!(payload.len(), self.payload_len, "payload length");
        self.code.encode(&crc::attach(payload))
    }

    pub fn decode(&self, llr: &[f64]) -> CodecResult {
        let cands = self.code.decode_list(llr, self.list_size);
        match cands.iter().find(|(b, _)| crc::check(b)) {
            Some((b, m)) => CodecResult {
                bits: b[..self.payload_len].to_vec(),
                success: true,
                metric: *m,
            },
            None => CodecResult {
                bits: cands[0].0[..self.payload_len].to_vec(),
                success: false,
                metric: cands[0].1,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hard_llr(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| 4.0 * (1.0 - 2.0 * b as f64)).collect()
    }

    /// x = u G with G built explicitly as the n-fold Kronecker power.
    fn kron_encode(u: &[u8]) -> Vec<u8> {
        let n = u.len();
        let mut g = vec![vec![1u8]];
        while g.len() < n {
            let s = g.len();
            let mut next = vec![vec![0u8; 2 * s]; 2 * s];
            for r in 0..s {
                for c in 0..s {
                    next[r][c] = g[r][c];
                    next[r + s][c] = g[r][c];
                    next[r + s][c + s] = g[r][c];
                }
            }
            g = next;
        }
        (0..n)
            .map(|c| (0..n).fold(0u8, |acc, r| acc ^ (u[r] & g[r][c])))
            .collect()
    }

    #[test]
    fn transform_matches_kronecker_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 8, 32] {
            let u: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let mut x = u.clone();
            polar_transform(&mut x);
            assert_eq!(x, kron_encode(&u));
        }
    }

    #[test]
    fn construction_freezes_punctured_prefix() {
        let code = PolarCode::new(28, 112, -5.0).unwrap();
        assert_eq!(code.mother_len(), 128);
        assert_eq!(code.info_positions().len(), 28);
        assert!(code.info_positions().iter().all(|&p| p >= 16));
        // The last synthetic channel is always the most reliable.
        assert!(code.info_positions().contains(&127));
    }

    #[test]
    fn ga_means_are_conserved_for_unit_depth() {
        // For one stage the variable-node mean is the sum of the inputs.
        let m = ga_bit_channel_means(&[1.0, 2.0]);
        assert!((m[1] - 3.0).abs() < 1e-12);
        assert!(m[0] < 1.0);
    }

    #[test]
    fn sc_and_scl_roundtrip_noiseless() {
        let codec = PolarCodec::new(12, 112, 8, -5.0).unwrap();
        let sc = PolarCodec::new(12, 112, 1, -5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let payload: Vec<u8> = (0..12).map(|_| rng.random_range(0..2)).collect();
            let cw = codec.encode(&payload);
            assert_eq!(cw.len(), 112);
            for c in [&codec, &sc] {
                let r = c.decode(&hard_llr(&cw));
                assert!(r.success);
                assert_eq!(r.bits, payload);
            }
        }
    }

    #[test]
    fn uncoded_full_rate_is_identity_on_info_bits() {
        // k = e = n: nothing frozen, SC must invert the transform exactly.
        let code = PolarCode::new(16, 16, 0.0).unwrap();
        let info: Vec<u8> = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1];
        let cw = code.encode(&info);
        let dec = code.decode_list(&hard_llr(&cw), 1);
        assert_eq!(dec[0].0, info);
    }

    #[test]
    fn list_paths_are_distinct_and_sorted() {
        let code = PolarCode::new(28, 112, -5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let llr: Vec<f64> = (0..112).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = code.decode_list(&llr, 8);
        assert_eq!(out.len(), 8);
        assert!(out.windows(2).all(|w| w[0].1 <= w[1].1));
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                assert_ne!(out[i].0, out[j].0);
            }
        }
    }
}
