//! Staggered warmup schedule for worker groups.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Joint,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Joint => "joint",
        }
    }
}

/// Starting position of each group within the `warmup + joint` cycle:
/// group `g` starts at `floor(g * (W + U) / G)`.
pub fn schedule_offsets(groups: usize, warmup: usize, joint: usize) -> Vec<usize> {
    let cycle = warmup + joint;
    (0..groups).map(|g| g * cycle / groups.max(1)).collect()
}

/// Phase at a position within the cycle.
pub fn phase_at(position: usize, warmup: usize) -> Phase {
    if position < warmup {
        Phase::Warmup
    } else {
        Phase::Joint
    }
}

/// True when some iteration may have every group in warmup, so the shared
/// sub-policies would receive no gradient.
pub fn starvation_possible(groups: usize, warmup: usize, joint: usize) -> bool {
    groups * joint < warmup + joint
}
