//! Compact node and face identifiers.
//!
//! Nodes are interned at scenario load; the human-readable names live in the
//! scenario and in audit output, everything else moves `Copy` indices around.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a node in the scenario's node table.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A node-local attachment point. Face 0 is always the local application;
/// network faces are numbered 1.. in link declaration order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct FaceId(pub u32);

impl FaceId {
    pub const APP: FaceId = FaceId(0);

    pub fn is_app(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}
