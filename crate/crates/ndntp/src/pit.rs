//! Pending Interest Table with three consumption disciplines.
//!
//! Standard is plain NDN: the first returning Data consumes the entry.
//! Aggregate keeps flow balance for multicast Interests by buffering one
//! response per outgoing face and emitting a single combined Data downstream.
//! MultiResponse deliberately breaks flow balance: every response is
//! forwarded downstream immediately and the entry lives until all expected
//! responses arrived (or it expires).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ids::FaceId;
use crate::name::Name;
use crate::packet::InnerResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PitMode {
    #[default]
    Standard,
    Aggregate,
    MultiResponse,
}

impl PitMode {
    pub fn parse(s: &str) -> Option<PitMode> {
        match s {
            "standard" => Some(PitMode::Standard),
            "aggregate" => Some(PitMode::Aggregate),
            "multi-response" | "multiresponse" => Some(PitMode::MultiResponse),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PitMode::Standard => "standard",
            PitMode::Aggregate => "aggregate",
            PitMode::MultiResponse => "multi-response",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InRecord {
    pub face: FaceId,
    pub nonce: u64,
    pub arrival_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutRecord {
    pub face: FaceId,
    pub sent_us: u64,
}

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub name: Name,
    pub in_records: Vec<InRecord>,
    pub out_records: Vec<OutRecord>,
    pub expiry_us: u64,
    pub expected_responses: usize,
    pub received_responses: usize,
    pub agg_buffer: Vec<InnerResponse>,
    pub agg_deadline_us: u64,
    /// Downstream Data emissions per in-record face (flow-balance audit).
    pub emissions: HashMap<FaceId, usize>,
}

impl PitEntry {
    pub fn new(name: Name, expiry_us: u64) -> Self {
        PitEntry {
            name,
            in_records: Vec::new(),
            out_records: Vec::new(),
            expiry_us,
            expected_responses: 0,
            received_responses: 0,
            agg_buffer: Vec::new(),
            agg_deadline_us: u64::MAX,
            emissions: HashMap::new(),
        }
    }

    pub fn add_in(&mut self, face: FaceId, nonce: u64, arrival_us: u64) {
        if let Some(r) = self.in_records.iter_mut().find(|r| r.face == face) {
            r.nonce = nonce;
            r.arrival_us = arrival_us;
        } else {
            self.in_records.push(InRecord {
                face,
                nonce,
                arrival_us,
            });
        }
    }

    pub fn add_out(&mut self, face: FaceId, sent_us: u64) {
        self.out_records.push(OutRecord { face, sent_us });
        self.expected_responses = self.out_records.len();
    }

    pub fn downstream_faces(&self) -> Vec<FaceId> {
        self.in_records.iter().map(|r| r.face).collect()
    }
}

#[derive(Debug, Default)]
pub struct PitTable {
    entries: HashMap<Name, PitEntry>,
    /// Names of recently consumed entries, for drop-reason reporting.
    consumed: HashMap<Name, u64>,
}

impl PitTable {
    pub fn new() -> Self {
        PitTable::default()
    }

    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &Name) -> Option<&mut PitEntry> {
        self.entries.get_mut(name)
    }

    pub fn insert(&mut self, entry: PitEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    pub fn consume(&mut self, name: &Name, now: u64) -> Option<PitEntry> {
        let entry = self.entries.remove(name);
        if entry.is_some() {
            self.consumed.insert(name.clone(), now);
        }
        entry
    }

    /// Entry expired without being satisfied; not remembered as consumed.
    pub fn expire(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    pub fn recently_consumed(&self, name: &Name, now: u64, ttl_us: u64) -> bool {
        matches!(self.consumed.get(name), Some(&at) if now.saturating_sub(at) <= ttl_us)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::{build_ndntp_name, Decorations};

    #[test]
    fn in_record_replaced_per_face() {
        let name = build_ndntp_name(&[1], 0, 0, Decorations::default()).unwrap();
        let mut entry = PitEntry::new(name, 100);
        entry.add_in(FaceId(1), 5, 10);
        entry.add_in(FaceId(2), 6, 11);
        entry.add_in(FaceId(1), 7, 12);
        assert_eq!(entry.in_records.len(), 2);
        assert_eq!(entry.in_records[0].nonce, 7);
    }

    #[test]
    fn expected_tracks_out_records() {
        let name = build_ndntp_name(&[1], 0, 0, Decorations::default()).unwrap();
        let mut entry = PitEntry::new(name, 100);
        entry.add_out(FaceId(1), 0);
        entry.add_out(FaceId(2), 0);
        entry.add_out(FaceId(3), 0);
        assert_eq!(entry.expected_responses, 3);
    }

    #[test]
    fn consumed_names_are_remembered() {
        let name = build_ndntp_name(&[1], 0, 0, Decorations::default()).unwrap();
        let mut pit = PitTable::new();
        pit.insert(PitEntry::new(name.clone(), 100));
        pit.consume(&name, 50);
        assert!(pit.recently_consumed(&name, 55, 10));
        assert!(!pit.recently_consumed(&name, 61, 10));
    }
}
