//! Keyed-hash response authentication.
//!
//! Responses are authenticated with SipHash-2-4 tags under a scenario-local
//! key table: enough to verify that a response was produced by a holder of a
//! trusted key and was not altered in flight, without dragging in a PKI.
//! Trust anchors are the set of key ids a client accepts.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::NodeId;

/// A tag over some covered bytes, attributable to `key_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEnvelope {
    pub key_id: NodeId,
    pub tag: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Ok,
    UnknownKey,
    BadTag,
}

/// 128-bit secrets per node, fixed at scenario setup.
#[derive(Debug, Clone, Default)]
pub struct KeyTable {
    keys: BTreeMap<NodeId, (u64, u64)>,
}

impl KeyTable {
    pub fn new() -> Self {
        KeyTable::default()
    }

    pub fn register(&mut self, id: NodeId, k0: u64, k1: u64) {
        self.keys.insert(id, (k0, k1));
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.keys.contains_key(&id)
    }

    /// Panics if `key_id` was never registered; scenario setup registers a
    /// key for every node.
    pub fn sign(&self, key_id: NodeId, bytes: &[u8]) -> SignedEnvelope {
        let (k0, k1) = self.keys[&key_id];
        SignedEnvelope {
            key_id,
            tag: siphash24(k0, k1, bytes),
        }
    }

    pub fn verify(
        &self,
        envelope: &SignedEnvelope,
        bytes: &[u8],
        trust_anchors: &BTreeSet<NodeId>,
    ) -> Verification {
        if !trust_anchors.contains(&envelope.key_id) {
            return Verification::UnknownKey;
        }
        match self.keys.get(&envelope.key_id) {
            None => Verification::UnknownKey,
            Some((k0, k1)) => {
                if siphash24(*k0, *k1, bytes) == envelope.tag {
                    Verification::Ok
                } else {
                    Verification::BadTag
                }
            }
        }
    }
}

/// SipHash-2-4 with a 128-bit key, per the reference description.
pub fn siphash24(k0: u64, k1: u64, bytes: &[u8]) -> u64 {
    let mut v0 = k0 ^ 0x736f6d6570736575;
    let mut v1 = k1 ^ 0x646f72616e646f6d;
    let mut v2 = k0 ^ 0x6c7967656e657261;
    let mut v3 = k1 ^ 0x7465646279746573;

    let mut chunks = bytes.chunks_exact(8);
    for chunk in &mut chunks {
        let m = u64::from_le_bytes(chunk.try_into().unwrap());
        v3 ^= m;
        sipround(&mut v0, &mut v1, &mut v2, &mut v3);
        sipround(&mut v0, &mut v1, &mut v2, &mut v3);
        v0 ^= m;
    }

    let rest = chunks.remainder();
    let mut last = (bytes.len() as u64 & 0xff) << 56;
    for (i, b) in rest.iter().enumerate() {
        last |= (*b as u64) << (8 * i);
    }
    v3 ^= last;
    sipround(&mut v0, &mut v1, &mut v2, &mut v3);
    sipround(&mut v0, &mut v1, &mut v2, &mut v3);
    v0 ^= last;

    v2 ^= 0xff;
    for _ in 0..4 {
        sipround(&mut v0, &mut v1, &mut v2, &mut v3);
    }
    v0 ^ v1 ^ v2 ^ v3
}

#[inline]
fn sipround(v0: &mut u64, v1: &mut u64, v2: &mut u64, v3: &mut u64) {
    *v0 = v0.wrapping_add(*v1);
    *v1 = v1.rotate_left(13);
    *v1 ^= *v0;
    *v0 = v0.rotate_left(32);
    *v2 = v2.wrapping_add(*v3);
    *v3 = v3.rotate_left(16);
    *v3 ^= *v2;
    *v0 = v0.wrapping_add(*v3);
    *v3 = v3.rotate_left(21);
    *v3 ^= *v0;
    *v2 = v2.wrapping_add(*v1);
    *v1 = v1.rotate_left(17);
    *v1 ^= *v2;
    *v2 = v2.rotate_left(32);
}
