//! Forwarding Information Base: name prefixes mapped to next-hop faces with
//! costs. Cost is the cumulative link delay (µs) of the best downstream path
//! to a server announcing the prefix, so a lower cost means a closer server.

use crate::ids::FaceId;
use crate::name::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextHop {
    pub face: FaceId,
    pub cost_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    /// Sorted by face id; face ids are distinct.
    pub nexthops: Vec<NextHop>,
}

impl FibEntry {
    pub fn new(prefix: Name, mut nexthops: Vec<NextHop>) -> Self {
        nexthops.sort_by_key(|h| h.face);
        FibEntry { prefix, nexthops }
    }

    /// Next hops excluding the face the Interest arrived on.
    pub fn eligible(&self, in_face: Option<FaceId>) -> Vec<NextHop> {
        self.nexthops
            .iter()
            .copied()
            .filter(|h| Some(h.face) != in_face)
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Fib {
    entries: Vec<FibEntry>,
}

impl Fib {
    pub fn new(mut entries: Vec<FibEntry>) -> Self {
        // longest prefix first; ties broken by text form for determinism
        entries.sort_by(|a, b| {
            b.prefix
                .len()
                .cmp(&a.prefix.len())
                .then_with(|| a.prefix.to_string().cmp(&b.prefix.to_string()))
        });
        Fib { entries }
    }

    /// Longest-prefix match.
    pub fn lookup(&self, name: &Name) -> Option<&FibEntry> {
        self.entries.iter().find(|e| e.prefix.is_prefix_of(name))
    }

    pub fn entries(&self) -> &[FibEntry] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::{build_ndntp_name, Decorations};

    fn hop(face: u32, cost: u64) -> NextHop {
        NextHop {
            face: FaceId(face),
            cost_us: cost,
        }
    }

    #[test]
    fn longest_prefix_wins() {
        let fib = Fib::new(vec![
            FibEntry::new(Name::ndntp_prefix(), vec![hop(1, 10)]),
            FibEntry::new(Name::stratum_prefix(1), vec![hop(2, 20)]),
        ]);
        let plain = build_ndntp_name(&[1], 0, 0, Decorations::default()).unwrap();
        let strata = build_ndntp_name(&[1], 0, 0, Decorations::stratum(1)).unwrap();
        assert_eq!(fib.lookup(&plain).unwrap().nexthops, vec![hop(1, 10)]);
        assert_eq!(fib.lookup(&strata).unwrap().nexthops, vec![hop(2, 20)]);
    }

    #[test]
    fn eligible_excludes_incoming_face() {
        let entry = FibEntry::new(Name::ndntp_prefix(), vec![hop(2, 10), hop(1, 5)]);
        assert_eq!(entry.eligible(Some(FaceId(1))), vec![hop(2, 10)]);
        assert_eq!(entry.eligible(None), vec![hop(1, 5), hop(2, 10)]);
    }

    #[test]
    fn no_match_is_none() {
        let fib = Fib::new(vec![FibEntry::new(Name::ndntp_prefix(), vec![hop(1, 1)])]);
        assert!(fib.lookup(&Name::from_text("/other/x").unwrap()).is_none());
    }
}
