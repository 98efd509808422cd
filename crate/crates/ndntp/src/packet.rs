//! Interest and Data packets.

use serde::{Deserialize, Serialize};

use crate::auth::SignedEnvelope;
use crate::ids::NodeId;
use crate::name::Name;
use crate::offset::NdntpPayload;

/// Default Interest lifetime, mirrored by the default PIT entry lifetime.
pub const DEFAULT_LIFETIME_US: u64 = 4_000_000;

/// A request. `discovery_record` is the extension field used by path
/// discovery: each node the Interest visits appends its id, and servers echo
/// the accumulated record in their response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub name: Name,
    pub nonce: u64,
    pub hop_limit: Option<u8>,
    pub must_be_fresh: bool,
    pub path_label: Option<Vec<NodeId>>,
    pub session_list: Option<Vec<u64>>,
    pub lifetime_us: u64,
    pub discovery_record: Option<Vec<NodeId>>,
}

impl Interest {
    pub fn new(name: Name, nonce: u64) -> Self {
        Interest {
            name,
            nonce,
            hop_limit: None,
            must_be_fresh: true,
            path_label: None,
            session_list: None,
            lifetime_us: DEFAULT_LIFETIME_US,
            discovery_record: None,
        }
    }
}

/// One server's signed response carried inside an aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerResponse {
    pub payload: NdntpPayload,
    pub producer: NodeId,
    pub signature: SignedEnvelope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataPayload {
    Single(NdntpPayload),
    /// Responses collected by a forwarder for one multicast Interest, in
    /// arrival order. `partial` is set when the aggregation deadline passed
    /// before every expected response arrived.
    Aggregate {
        parts: Vec<InnerResponse>,
        partial: bool,
    },
}

impl DataPayload {
    /// Number of server responses carried.
    pub fn response_count(&self) -> usize {
        match self {
            DataPayload::Single(_) => 1,
            DataPayload::Aggregate { parts, .. } => parts.len(),
        }
    }
}

/// A response. The signature covers the name and payload; for aggregates the
/// outer signature authenticates the aggregating forwarder while each part
/// keeps its producer's own envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Data {
    pub name: Name,
    pub freshness_period_us: u64,
    pub payload: DataPayload,
    pub signature: SignedEnvelope,
    pub producer: NodeId,
    pub path_record: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }
}

/// Deterministic byte encoding of the signed portion of a payload.
pub fn payload_signing_bytes(name: &Name, payload: &NdntpPayload) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(name.to_string().as_bytes());
    out.push(0);
    out.extend_from_slice(&payload.t2_receive_us.to_le_bytes());
    out.extend_from_slice(&payload.t3_transmit_us.to_le_bytes());
    out.extend_from_slice(&payload.stratum.to_le_bytes());
    out.extend_from_slice(&payload.server.0.to_le_bytes());
    out.extend_from_slice(payload.echo_of_name.to_string().as_bytes());
    out
}

/// Signed portion of a whole Data packet (outer envelope input).
pub fn data_signing_bytes(name: &Name, payload: &DataPayload) -> Vec<u8> {
    match payload {
        DataPayload::Single(p) => payload_signing_bytes(name, p),
        DataPayload::Aggregate { parts, partial } => {
            let mut out = Vec::new();
            out.extend_from_slice(name.to_string().as_bytes());
            out.push(0);
            out.push(u8::from(*partial));
            for part in parts {
                out.extend_from_slice(&payload_signing_bytes(name, &part.payload));
                out.extend_from_slice(&part.producer.0.to_le_bytes());
                out.extend_from_slice(&part.signature.tag.to_le_bytes());
            }
            out
        }
    }
}
