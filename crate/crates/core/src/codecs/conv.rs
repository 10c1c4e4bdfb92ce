//! Tail-biting convolutional code, constraint length 7, generators
//! `133, 171, 165` (octal), with optional puncturing to higher rates and a
//! circular (wrap-around) soft-decision Viterbi decoder.
//!
//! The encoder register starts from the last six information bits, so the
//! trellis begins and ends in the same state and no tail bits are sent.

use super::crc;
use super::CodecResult;
use serde::{Deserialize, Serialize};

const K: usize = 7;
const STATES: usize = 1 << (K - 1);
const GENERATORS: [u8; 3] = [0o133, 0o171, 0o165];

/// Code rate obtained from the rate-1/3 mother code by periodic puncturing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConvRate {
    #[serde(rename = "1/3")]
    OneThird,
    #[serde(rename = "1/2")]
    OneHalf,
    #[serde(rename = "2/3")]
    TwoThirds,
    #[serde(rename = "3/4")]
    ThreeQuarters,
}

impl ConvRate {
    /// Keep-mask over `(g0, g1, g2)` outputs, one triple per input step, repeating.
    fn pattern(self) -> &'static [[bool; 3]] {
        const R13: [[bool; 3]; 1] = [[true, true, true]];
        const R12: [[bool; 3]; 1] = [[true, true, false]];
        const R23: [[bool; 3]; 2] = [[true, true, false], [true, false, false]];
        const R34: [[bool; 3]; 3] = [[true, true, false], [true, false, false], [false, true, false]];
        match self {
            ConvRate::OneThird => &R13,
            ConvRate::OneHalf => &R12,
            ConvRate::TwoThirds => &R23,
            ConvRate::ThreeQuarters => &R34,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            ConvRate::OneThird => 1.0 / 3.0,
            ConvRate::OneHalf => 0.5,
            ConvRate::TwoThirds => 2.0 / 3.0,
            ConvRate::ThreeQuarters => 0.75,
        }
    }

    /// Coded length for `info_len` input bits.
    pub fn coded_len(self, info_len: usize) -> usize {
        let p = self.pattern();
        (0..info_len)
            .map(|t| p[t % p.len()].iter().filter(|&&k| k).count())
            .sum()
    }
}

#[inline]
fn parity(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Output triple for register contents `(input << 6) | state`.
fn outputs(reg: u8) -> [u8; 3] {
    GENERATORS.map(|g| parity(reg & g))
}

#[derive(Debug, Clone)]
pub struct ConvCode {
    rate: ConvRate,
    /// `table[state][input]` = output triple as a 3-bit mask.
    table: [[[u8; 3]; 2]; STATES],
    /// Wrap-around depth on each side of the block for circular decoding.
    wrap: usize,
}

impl ConvCode {
    pub fn new(rate: ConvRate) -> Self {
        let mut table = [[[0u8; 3]; 2]; STATES];
        for (state, row) in table.iter_mut().enumerate() {
            for input in 0..2u8 {
                row[input as usize] = outputs((input << 6) | state as u8);
            }
        }
        Self { rate, table, wrap: 8 * K }
    }

    pub fn rate(&self) -> ConvRate {
        self.rate
    }

    /// Encodes `info` (0/1 per byte) into punctured coded bits.
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let l = info.len();
        if l == 0 {
            return Vec::new();
        }
        // Tail-biting start: register holds the last six bits, newest in bit 5.
        let mut state = 0u8;
        for i in 0..K - 1 {
            state |= (info[(l - 1 + (K - 1) * l - i) % l] & 1) << (K - 2 - i);
        }
        let pattern = self.rate.pattern();
        let mut out = Vec::with_capacity(self.rate.coded_len(l));
        for (t, &b) in info.iter().enumerate() {
            let o = self.table[state as usize][b as usize & 1];
            for (j, keep) in pattern[t % pattern.len()].iter().enumerate() {
                if *keep {
                    out.push(o[j]);
                }
            }
            state = ((b & 1) << (K - 2)) | (state >> 1);
        }
        out
    }

    /// Soft-decision circular Viterbi decode of `llr` (positive favours 0)
    /// back to `info_len` bits.
    pub fn decode_bits(&self, llr: &[f64], info_len: usize) -> (Vec<u8>, f64) {
        let l = info_len;
        if l == 0 {
            return (Vec::new(), 0.0);
        }
        assert_eq!(llr.len(), self.rate.coded_len(l), "LLR length mismatch");
        let pattern = self.rate.pattern();
        // De-puncture into per-step triples (0 for punctured positions).
        let mut steps = vec![[0.0f64; 3]; l];
        let mut pos = 0;
        for (t, step) in steps.iter_mut().enumerate() {
            for (j, keep) in pattern[t % pattern.len()].iter().enumerate() {
                if *keep {
                    step[j] = llr[pos];
                    pos += 1;
                }
            }
        }

        let wrap = self.wrap.min(l);
        let total = l + 2 * wrap;
        let step_at = |i: usize| (i + l - wrap) % l;

        let mut metric = [0.0f64; STATES];
        let mut next = [0.0f64; STATES];
        // survivors[i][ns] = the bit shifted out of the predecessor state
        let mut survivors = vec![[0u8; STATES]; total];
        for (i, surv) in survivors.iter_mut().enumerate() {
            let s = &steps[step_at(i)];
            for ns in 0..STATES {
                let input = ns >> (K - 2);
                let base = (ns << 1) & (STATES - 1);
                let mut best = f64::NEG_INFINITY;
                let mut best_x = 0u8;
                for x in 0..2 {
                    let ps = base | x;
                    let o = &self.table[ps][input];
                    let bm = (1.0 - 2.0 * o[0] as f64) * s[0]
                        + (1.0 - 2.0 * o[1] as f64) * s[1]
                        + (1.0 - 2.0 * o[2] as f64) * s[2];
                    let m = metric[ps] + bm;
                    if m > best {
                        best = m;
                        best_x = x as u8;
                    }
                }
                next[ns] = best;
                surv[ns] = best_x;
            }
            // Renormalize to keep metrics bounded on long blocks.
            let top = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (m, n) in metric.iter_mut().zip(next.iter()) {
                *m = n - top;
            }
        }

        let (mut state, _) = metric
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        let mut decided = vec![0u8; total];
        for i in (0..total).rev() {
            decided[i] = (state >> (K - 2)) as u8;
            state = ((state << 1) & (STATES - 1)) | survivors[i][state] as usize;
        }
        let bits = decided[wrap..wrap + l].to_vec();
        // Path metric of the decision against the received soft values.
        let coded = self.encode(&bits);
        let score: f64 = coded
            .iter()
            .zip(llr)
            .map(|(&c, &v)| (1.0 - 2.0 * c as f64) * v)
            .sum();
        (bits, score)
    }
}

/// Convolutional short-packet codec: payload plus CRC-16, tail-biting encode.
#[derive(Debug, Clone)]
pub struct CcCodec {
    code: ConvCode,
    payload_len: usize,
}

impl CcCodec {
    pub fn new(payload_len: usize, rate: ConvRate) -> Self {
        Self {
            code: ConvCode::new(rate),
            payload_len,
        }
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn coded_len(&self) -> usize {
        self.code.rate.coded_len(self.payload_len + crc::CRC_LEN)
    }

    pub fn encode(&self, payload: &[u8]) -> Vec<u8> {
        assert_eq!(payload.len(), self.payload_len, "payload length");
        self.code.encode(&crc::attach(payload))
    }

    pub fn decode(&self, llr: &[f64]) -> CodecResult {
        let (block, metric) = self.code.decode_bits(llr, self.payload_len + crc::CRC_LEN);
        let success = crc::check(&block);
        CodecResult {
            bits: block[..self.payload_len].to_vec(),
            success,
            metric,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hard_llr(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| 1.0 - 2.0 * b as f64).collect()
    }

    #[test]
    fn coded_lengths() {
        assert_eq!(ConvRate::OneThird.coded_len(28), 84);
        assert_eq!(ConvRate::OneHalf.coded_len(28), 56);
        assert_eq!(ConvRate::TwoThirds.coded_len(30), 45);
        assert_eq!(ConvRate::ThreeQuarters.coded_len(30), 40);
        assert_eq!(CcCodec::new(12, ConvRate::OneThird).coded_len(), 3 * (12 + 16));
    }

    #[test]
    fn encoder_is_tail_biting() {
        // Rotating the input rotates the rate-1/3 output by three bits per step.
        let code = ConvCode::new(ConvRate::OneThird);
        let info: Vec<u8> = vec![1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1];
        let mut rotated = info.clone();
        rotated.rotate_left(1);
        let mut expect = code.encode(&info);
        expect.rotate_left(3);
        assert_eq!(code.encode(&rotated), expect);
    }

    #[test]
    fn all_zero_input_gives_all_zero_output() {
        let code = ConvCode::new(ConvRate::OneThird);
        assert!(code.encode(&[0; 40]).iter().all(|&b| b == 0));
    }

    #[test]
    fn noiseless_roundtrip_every_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rate in [ConvRate::OneThird, ConvRate::OneHalf, ConvRate::TwoThirds, ConvRate::ThreeQuarters] {
            let code = ConvCode::new(rate);
            for len in [7usize, 28, 100, 517] {
                let info: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                let (dec, _) = code.decode_bits(&hard_llr(&code.encode(&info)), len);
                assert_eq!(dec, info, "{rate:?} len {len}");
            }
        }
    }

    #[test]
    fn corrects_isolated_errors() {
        let codec = CcCodec::new(12, ConvRate::OneThird);
        let payload = [1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0];
        let mut llr = hard_llr(&codec.encode(&payload));
        for i in [3usize, 30, 61] {
            llr[i] = -llr[i];
        }
        let r = codec.decode(&llr);
        assert!(r.success);
        assert_eq!(r.bits, payload);
    }

    #[test]
    fn crc_flags_garbage() {
        let codec = CcCodec::new(12, ConvRate::OneThird);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut passes = 0;
        for _ in 0..200 {
            let llr: Vec<f64> = (0..84).map(|_| rng.random_range(-1.0..1.0)).collect();
            passes += codec.decode(&llr).success as usize;
        }
        // CRC-16 false-accept rate is ~1.5e-5 per decode.
        assert!(passes <= 1, "{passes}");
    }
}
