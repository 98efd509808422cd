//! Content store: exact-name cache of forwarded Data with freshness
//! semantics and a cache-management policy hook.
//!
//! Time responses are the one kind of content a cache can actively harm:
//! a stale timestamp is worse than no timestamp. Producers therefore mark
//! responses with freshness period 0 and clients set MustBeFresh; the
//! policies here defend against producers that do not.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::name::Name;
use crate::packet::Data;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsPolicy {
    /// Cache everything as published.
    #[default]
    CacheAll,
    /// Never cache names under /NDNTP/time.
    NoCacheNdntp,
    /// Cache, but cap the stored freshness period.
    ClampFreshness { max_us: u64 },
}

#[derive(Debug, Clone)]
pub struct CsEntry {
    pub data: Data,
    pub cached_at: u64,
}

impl CsEntry {
    pub fn age(&self, now: u64) -> u64 {
        now - self.cached_at
    }

    pub fn is_fresh(&self, now: u64) -> bool {
        self.age(now) < self.data.freshness_period_us
    }
}

#[derive(Debug)]
pub struct ContentStore {
    capacity: usize,
    policy: CsPolicy,
    entries: HashMap<Name, CsEntry>,
    // insertion order for least-recently-cached eviction
    order: VecDeque<(Name, u64)>,
}

pub enum CsLookup<'a> {
    Hit(&'a CsEntry),
    Miss,
}

impl ContentStore {
    pub fn new(capacity: usize, policy: CsPolicy) -> Self {
        ContentStore {
            capacity,
            policy,
            entries: HashMap::new(),
            order: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact-name lookup. A MustBeFresh Interest is only satisfied by a
    /// fresh entry; without MustBeFresh, stale entries qualify too.
    pub fn lookup(&self, name: &Name, must_be_fresh: bool, now: u64) -> CsLookup<'_> {
        match self.entries.get(name) {
            Some(entry) if !must_be_fresh || entry.is_fresh(now) => CsLookup::Hit(entry),
            _ => CsLookup::Miss,
        }
    }

    pub fn insert(&mut self, mut data: Data, now: u64) {
        if self.capacity == 0 {
            return;
        }
        match self.policy {
            CsPolicy::CacheAll => {}
            CsPolicy::NoCacheNdntp => {
                if data.name.is_ndntp() {
                    return;
                }
            }
            CsPolicy::ClampFreshness { max_us } => {
                data.freshness_period_us = data.freshness_period_us.min(max_us);
            }
        }
        let name = data.name.clone();
        self.entries.insert(
            name.clone(),
            CsEntry {
                data,
                cached_at: now,
            },
        );
        self.order.push_back((name, now));
        while self.entries.len() > self.capacity {
            self.evict_oldest();
        }
    }

    fn evict_oldest(&mut self) {
        while let Some((name, queued_at)) = self.order.pop_front() {
            if let Some(entry) = self.entries.get(&name) {
                // skip stale queue slots left behind by re-insertion
                if entry.cached_at == queued_at {
                    self.entries.remove(&name);
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::SignedEnvelope;
    use crate::ids::NodeId;
    use crate::name::{build_ndntp_name, Decorations};
    use crate::offset::NdntpPayload;
    use crate::packet::DataPayload;

    fn data(sample: u64, freshness_us: u64) -> Data {
        let name = build_ndntp_name(&[1], 0, sample, Decorations::default()).unwrap();
        Data {
            name: name.clone(),
            freshness_period_us: freshness_us,
            payload: DataPayload::Single(NdntpPayload {
                t2_receive_us: 0,
                t3_transmit_us: 0,
                stratum: 1,
                server: NodeId(9),
                echo_of_name: name,
            }),
            signature: SignedEnvelope {
                key_id: NodeId(9),
                tag: 0,
            },
            producer: NodeId(9),
            path_record: None,
        }
    }

    #[test]
    fn zero_freshness_is_instantly_stale_for_mbf() {
        let mut cs = ContentStore::new(8, CsPolicy::CacheAll);
        let d = data(0, 0);
        cs.insert(d.clone(), 1_000);
        assert!(matches!(cs.lookup(&d.name, true, 1_001), CsLookup::Miss));
        // non-MustBeFresh Interests accept stale entries
        assert!(matches!(cs.lookup(&d.name, false, 1_001), CsLookup::Hit(_)));
    }

    #[test]
    fn fresh_window_serves_mbf() {
        let mut cs = ContentStore::new(8, CsPolicy::CacheAll);
        let d = data(0, 10_000_000);
        cs.insert(d.clone(), 0);
        assert!(matches!(
            cs.lookup(&d.name, true, 5_000_000),
            CsLookup::Hit(_)
        ));
        assert!(matches!(
            cs.lookup(&d.name, true, 10_000_000),
            CsLookup::Miss
        ));
    }

    #[test]
    fn no_cache_ndntp_skips_time_names() {
        let mut cs = ContentStore::new(8, CsPolicy::NoCacheNdntp);
        cs.insert(data(0, 1_000), 0);
        assert_eq!(cs.len(), 0);
    }

    #[test]
    fn clamp_freshness_caps_stored_period() {
        let mut cs = ContentStore::new(8, CsPolicy::ClampFreshness { max_us: 1_000_000 });
        let d = data(0, 3_600_000_000);
        cs.insert(d.clone(), 0);
        assert!(matches!(
            cs.lookup(&d.name, true, 999_999),
            CsLookup::Hit(_)
        ));
        assert!(matches!(
            cs.lookup(&d.name, true, 1_000_000),
            CsLookup::Miss
        ));
    }

    #[test]
    fn eviction_is_least_recently_cached() {
        let mut cs = ContentStore::new(2, CsPolicy::CacheAll);
        let d0 = data(0, 1);
        let d1 = data(1, 1);
        let d2 = data(2, 1);
        cs.insert(d0.clone(), 0);
        cs.insert(d1.clone(), 1);
        cs.insert(d2.clone(), 2);
        assert_eq!(cs.len(), 2);
        assert!(matches!(cs.lookup(&d0.name, false, 3), CsLookup::Miss));
        assert!(matches!(cs.lookup(&d1.name, false, 3), CsLookup::Hit(_)));
        assert!(matches!(cs.lookup(&d2.name, false, 3), CsLookup::Hit(_)));
    }

    #[test]
    fn reinsert_refreshes_entry() {
        let mut cs = ContentStore::new(2, CsPolicy::CacheAll);
        let d0 = data(0, 1);
        let d1 = data(1, 1);
        cs.insert(d0.clone(), 0);
        cs.insert(d1.clone(), 1);
        cs.insert(d0.clone(), 5);
        cs.insert(data(2, 1), 6);
        // d0 was re-cached at t=5, so d1 (t=1) is the eviction victim
        assert!(matches!(cs.lookup(&d0.name, false, 8), CsLookup::Hit(_)));
        assert!(matches!(cs.lookup(&d1.name, false, 8), CsLookup::Miss));
        assert_eq!(cs.len(), 2);
    }
}
