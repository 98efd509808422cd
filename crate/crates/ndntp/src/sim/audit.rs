//! The audit trail: one record per packet transfer, drop, and protocol
//! event. The trail is the ground truth the flow-balance, freshness, and
//! pinning audits run against, and its serialized bytes define the
//! determinism hash of a run.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventTag {
    /// Packet arrived at a node on a face.
    Recv,
    /// Packet left a node on a face.
    Send,
    /// Packet dropped at a node.
    Drop,
    /// Packet lost on a link.
    Loss,
    /// Content store satisfied an Interest.
    CsHit,
    /// Interest joined an existing PIT entry instead of being forwarded.
    PitAgg,
    /// Session pin created or replaced.
    Pin,
    /// Forwarder updated its passive time estimate.
    PassiveSync,
    /// Client application accepted a response.
    AppRecv,
    /// Client application issued a request.
    AppSend,
    /// Client computed its combined offset.
    SyncResult,
    /// A server stepped its serving clock from an upstream stratum.
    StratumStep,
}

/// A flat record; unused fields are omitted from the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: u64,
    pub node: String,
    pub ev: EventTag,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub face: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pkt: Option<char>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nonce: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub producer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mbf: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub age_us: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub freshness_us: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parts: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub session: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value_us: Option<i64>,
}

impl AuditRecord {
    pub fn new(t: u64, node: impl Into<String>, ev: EventTag) -> Self {
        AuditRecord {
            t,
            node: node.into(),
            ev,
            face: None,
            pkt: None,
            name: None,
            nonce: None,
            producer: None,
            reason: None,
            mbf: None,
            age_us: None,
            freshness_us: None,
            parts: None,
            session: None,
            value_us: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trail {
    pub records: Vec<AuditRecord>,
}

impl Trail {
    pub fn push(&mut self, record: AuditRecord) {
        self.records.push(record);
    }

    /// Line-delimited JSON, one record per line, fields in declaration
    /// order: byte-identical across runs of the same (scenario, seed).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("audit record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Trail, serde_json::Error> {
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(Trail { records })
    }

    /// FNV-1a over the serialized trail.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_jsonl().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }
}
