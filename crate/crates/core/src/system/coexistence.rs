//! Repair policies for punctured eMBB transport blocks.

use super::harq::HarqProcess;
use super::Policy;

/// What to send when a transport block comes back for another attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetransmissionPlan {
    /// Codeblock indices to send, in mapping order.
    pub codeblocks: Vec<usize>,
    /// Whether cells flagged as punctured are left out of soft combining.
    pub excise_punctured: bool,
}

/// Plan for a process that failed its last attempt; `None` once every
/// codeblock has decoded.
pub fn apply_coexistence(policy: Policy, process: &HarqProcess) -> Option<RetransmissionPlan> {
    if process.complete() {
        return None;
    }
    let codeblocks = if policy.codeblock_level() {
        process
            .codeblocks
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.decoded)
            .map(|(i, _)| i)
            .collect()
    } else {
        (0..process.codeblocks.len()).collect()
    };
    Some(RetransmissionPlan {
        codeblocks,
        excise_punctured: policy.indicator_known(),
    })
}
