//! 16-bit CRC with generator `D^16 + D^12 + D^5 + 1`, MSB-first, zero init.

const POLY: u16 = 0x1021;
pub const CRC_LEN: usize = 16;

/// CRC of a bit sequence (one bit per byte, values 0/1).
pub fn crc16(bits: &[u8]) -> u16 {
    let mut reg: u16 = 0;
    for &b in bits {
        let feedback = ((reg >> 15) as u8 ^ (b & 1)) != 0;
        reg <<= 1;
        if feedback {
            reg ^= POLY;
        }
    }
    reg
}

/// `payload || crc16(payload)`, CRC bits MSB first.
pub fn attach(payload: &[u8]) -> Vec<u8> {
    let crc = crc16(payload);
    let mut out = Vec::with_capacity(payload.len() + CRC_LEN);
    out.extend_from_slice(payload);
    out.extend((0..CRC_LEN).rev().map(|i| ((crc >> i) & 1) as u8));
    out
}

/// True when the trailing 16 bits are the CRC of the leading ones.
pub fn check(block: &[u8]) -> bool {
    // Appending the CRC drives the register to zero.
    block.len() >= CRC_LEN && crc16(block) == 0
}
