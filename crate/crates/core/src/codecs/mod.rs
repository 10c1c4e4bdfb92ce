//! Short-packet codecs: sparse vector coding, the tail-biting convolutional
//! baseline and the CRC-aided polar baseline.

pub mod combinatorics;
pub mod conv;
pub mod crc;
pub mod modulation;
pub mod polar;
pub mod svc;

pub use combinatorics::{index_to_support, support_to_index, svc_capacity};
pub use conv::{CcCodec, ConvCode, ConvRate};
pub use modulation::Modulation;
pub use polar::{PolarCode, PolarCodec};
pub use svc::{SvcCodec, SvcParams};

/// Outcome of one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecResult {
    pub bits: Vec<u8>,
    /// CRC pass for the CRC codecs; valid codeword index for SVC.
    pub success: bool,
    /// Residual norm (SVC) or path metric (CC, polar).
    pub metric: f64,
}
