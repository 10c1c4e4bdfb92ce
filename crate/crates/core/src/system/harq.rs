//! Chase-combining soft buffers and the puncturing penalty.
//!
//! Each codeblock keeps, per cell, the SNR accumulated from clean
//! receptions and the SNR of receptions that were silently overwritten by
//! URLLC. A clean reception adds `C(snr)` bits of mutual information per
//! cell; a corrupted one, which the decoder takes for eMBB data, removes
//! `(w - 1) C(snr)` bits. The codeblock's effective SNR is the AWGN SNR with
//! the same mean information per cell.

use super::traffic::UrllcArrival;

/// Gaussian-input capacity in bits per RE.
pub fn shannon(snr: f64) -> f64 {
    (1.0 + snr.max(0.0)).log2()
}

/// Mutual information of one cell given clean and corrupted accumulated SNR.
pub fn cell_information(clean: f64, corrupted: f64, garbage_weight: f64) -> f64 {
    shannon(clean) - (garbage_weight - 1.0) * shannon(corrupted)
}

/// Effective SNR (linear) of a codeblock received at `snr` with a fraction
/// `punctured` of its cells overwritten. With the indicator the punctured
/// cells are erased; without it they carry misleading information.
pub fn puncture_snr_penalty(snr: f64, punctured: f64, indicator_known: bool, garbage_weight: f64) -> f64 {
    let f = punctured.clamp(0.0, 1.0);
    let c = shannon(snr);
    let mi = if indicator_known {
        (1.0 - f) * c
    } else {
        (1.0 - f) * c - f * (garbage_weight - 1.0) * c
    };
    if mi <= 0.0 {
        0.0
    } else {
        mi.exp2() - 1.0
    }
}

/// What one cell contributed in one attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reception {
    Clean(f64),
    Corrupted(f64),
    Erased,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeblockBuffer {
    /// Codeblock length in bits, CRC included.
    pub bits: usize,
    clean: Vec<f64>,
    corrupted: Vec<f64>,
    pub decoded: bool,
}

impl CodeblockBuffer {
    pub fn new(bits: usize, n_cells: usize) -> Self {
        Self {
            bits,
            clean: vec![0.0; n_cells],
            corrupted: vec![0.0; n_cells],
            decoded: false,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.clean.len()
    }

    pub fn payload_bits(&self) -> usize {
        self.bits.saturating_sub(crate::codecs::crc::CRC_LEN)
    }

    pub fn combine(&mut self, cell: usize, r: Reception) {
        match r {
            Reception::Clean(s) => self.clean[cell] += s,
            Reception::Corrupted(s) => self.corrupted[cell] += s,
            Reception::Erased => {}
        }
    }

    /// Sum of clean SNR over all cells; never decreases.
    pub fn accumulated_snr(&self) -> f64 {
        self.clean.iter().sum()
    }

    pub fn information(&self, garbage_weight: f64) -> f64 {
        if self.clean.is_empty() {
            return 0.0;
        }
        let mi = self
            .clean
            .iter()
            .zip(&self.corrupted)
            .map(|(&c, &g)| cell_information(c, g, garbage_weight))
            .sum::<f64>()
            / self.clean.len() as f64;
        mi.max(0.0)
    }

    pub fn effective_snr(&self, garbage_weight: f64) -> f64 {
        self.information(garbage_weight).exp2() - 1.0
    }
}

/// One eMBB transport block in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub id: u32,
    pub user: u16,
    pub mcs: u8,
    pub subbands: Vec<usize>,
    pub codeblocks: Vec<CodeblockBuffer>,
    /// Share of each codeblock's cells spent on extra parity.
    pub extra_parity: f64,
    /// Transmissions made so far, the first included.
    pub attempts: u32,
    pub ready_slot: u64,
}

impl HarqProcess {
    pub fn complete(&self) -> bool {
        self.codeblocks.iter().all(|c| c.decoded)
    }

    pub fn payload_bits(&self) -> usize {
        self.codeblocks.iter().map(CodeblockBuffer::payload_bits).sum()
    }

    /// SNR at which codeblock `i` decodes like a codeblock of the nominal
    /// rate: extra parity raises the information available per payload bit.
    pub fn decoding_snr(&self, i: usize, garbage_weight: f64) -> f64 {
        let mi = self.codeblocks[i].information(garbage_weight) / (1.0 - self.extra_parity);
        mi.exp2() - 1.0
    }
}

/// One URLLC packet awaiting (re)transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct UrllcHarq {
    pub arrival: UrllcArrival,
    pub attempts: u32,
    /// Chase-combined SNR after repetition combining.
    pub accumulated_snr: f64,
    pub ready_us: f64,
}

impl UrllcHarq {
    pub fn new(arrival: UrllcArrival) -> Self {
        Self {
            ready_us: arrival.time_us,
            arrival,
            attempts: 0,
            accumulated_snr: 0.0,
        }
    }
}
