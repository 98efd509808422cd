//! Next-hop selection strategies.
//!
//! Time-sync traffic wants things plain NDN forwarding does not give:
//! samples of one session must keep reaching the same server, a client may
//! want servers at least h hops away or a tunable mix of near and far
//! servers, and a multicast request should fan out to every server. Each
//! strategy here is a pure decision over the parsed name, the Interest, the
//! FIB entry, per-node strategy state, and the node's seeded random stream.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fib::{FibEntry, NextHop};
use crate::ids::FaceId;
use crate::sim::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no eligible route")]
pub struct NoRoute;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StrategyKind {
    #[default]
    BestRoute,
    SessionPin,
    HopLimit {
        threshold: u8,
    },
    Probabilistic,
    Multicast,
    /// Forwarding is driven by the label carried in the Interest; unlabeled
    /// Interests fall back to best-route.
    PathLabel,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s {
            "best-route" => Some(StrategyKind::BestRoute),
            "session-pin" => Some(StrategyKind::SessionPin),
            "hop-limit" => Some(StrategyKind::HopLimit { threshold: 1 }),
            "probabilistic" => Some(StrategyKind::Probabilistic),
            "multicast" => Some(StrategyKind::Multicast),
            "path-label" => Some(StrategyKind::PathLabel),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::BestRoute => "best-route",
            StrategyKind::SessionPin => "session-pin",
            StrategyKind::HopLimit { .. } => "hop-limit",
            StrategyKind::Probabilistic => "probabilistic",
            StrategyKind::Multicast => "multicast",
            StrategyKind::PathLabel => "path-label",
        }
    }
}

/// FNV-1a 64-bit: the fixed published hash behind session pinning, so pins
/// are portable across implementations. Input is the name's hash bytes
/// followed by the session number in little-endian.
pub fn h64(hash: &[u8], session: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in hash.iter().chain(session.to_le_bytes().iter()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Per-node pin table: (hash, session) → face. The sample number never
/// participates, so every sample of a session takes the same path.
#[derive(Debug, Clone, Default)]
pub struct SessionPinState {
    pins: HashMap<(Vec<u8>, u64), FaceId>,
}

impl SessionPinState {
    pub fn new() -> Self {
        SessionPinState::default()
    }

    pub fn get(&self, hash: &[u8], session: u64) -> Option<FaceId> {
        self.pins.get(&(hash.to_vec(), session)).copied()
    }

    fn set(&mut self, hash: &[u8], session: u64, face: FaceId) {
        self.pins.insert((hash.to_vec(), session), face);
    }
}

fn lowest_cost(eligible: &[NextHop]) -> Option<FaceId> {
    eligible
        .iter()
        .min_by_key(|h| (h.cost_us, h.face))
        .map(|h| h.face)
}

fn highest_cost(eligible: &[NextHop]) -> Option<FaceId> {
    // cost ties break toward the smallest face id, mirroring best-route
    eligible
        .iter()
        .min_by_key(|h| (std::cmp::Reverse(h.cost_us), h.face))
        .map(|h| h.face)
}

/// Lowest-cost eligible face; ties broken by smallest face id.
pub fn best_route(entry: &FibEntry, in_face: Option<FaceId>) -> Result<FaceId, NoRoute> {
    lowest_cost(&entry.eligible(in_face)).ok_or(NoRoute)
}

/// Returns the pinned face for (hash, session), creating the pin on first
/// use: `eligible[h64(hash, session) mod |eligible|]` with eligible faces
/// sorted by id. If the pinned face left the FIB entry, the session re-pins
/// deterministically among the survivors.
pub fn session_pin(
    state: &mut SessionPinState,
    hash: &[u8],
    session: u64,
    entry: &FibEntry,
    in_face: Option<FaceId>,
) -> Result<FaceId, NoRoute> {
    let eligible = entry.eligible(in_face);
    if eligible.is_empty() {
        return Err(NoRoute);
    }
    if let Some(face) = state.get(hash, session) {
        if eligible.iter().any(|h| h.face == face) {
            return Ok(face);
        }
    }
    let idx = (h64(hash, session) % eligible.len() as u64) as usize;
    let face = eligible[idx].face;
    state.set(hash, session, face);
    Ok(face)
}

/// Hop-limit distance strategy. The pipeline has already decremented the
/// hop limit; while the remaining budget exceeds the threshold the Interest
/// chases the highest-cost (most distant) face, then switches to best route.
pub fn hop_limit_choose(
    remaining: u8,
    threshold: u8,
    entry: &FibEntry,
    in_face: Option<FaceId>,
) -> Result<FaceId, NoRoute> {
    let eligible = entry.eligible(in_face);
    let pick = if remaining > threshold {
        highest_cost(&eligible)
    } else {
        lowest_cost(&eligible)
    };
    pick.ok_or(NoRoute)
}

/// Probability-decorated selection: with probability P (from the name) take
/// the lowest-cost face, otherwise the highest-cost face.
pub fn probabilistic_choose(
    probability_ppm: u32,
    entry: &FibEntry,
    in_face: Option<FaceId>,
    rng: &mut RngStream,
) -> Result<FaceId, NoRoute> {
    let eligible = entry.eligible(in_face);
    if eligible.is_empty() {
        return Err(NoRoute);
    }
    let pick = if rng.next_ppm() < probability_ppm {
        lowest_cost(&eligible)
    } else {
        highest_cost(&eligible)
    };
    pick.ok_or(NoRoute)
}

/// All eligible faces, sorted by face id.
pub fn multicast_choose(entry: &FibEntry, in_face: Option<FaceId>) -> Result<Vec<FaceId>, NoRoute> {
    let mut faces: Vec<FaceId> = entry.eligible(in_face).iter().map(|h| h.face).collect();
    faces.sort();
    if faces.is_empty() {
        return Err(NoRoute);
    }
    Ok(faces)
}

/// Multicast over an explicit session list: one pinned face per listed
/// session, deduplicated, so re-using the list reaches the same server set.
pub fn multicast_sessions(
    state: &mut SessionPinState,
    hash: &[u8],
    sessions: &[u64],
    entry: &FibEntry,
    in_face: Option<FaceId>,
) -> Result<Vec<FaceId>, NoRoute> {
    let mut faces = Vec::new();
    for &session in sessions {
        let face = session_pin(state, hash, session, entry, in_face)?;
        if !faces.contains(&face) {
            faces.push(face);
        }
    }
    faces.sort();
    if faces.is_empty() {
        return Err(NoRoute);
    }
    Ok(faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::Name;
    use crate::sim::rng::Scope;

    fn entry(hops: &[(u32, u64)]) -> FibEntry {
        FibEntry::new(
            Name::ndntp_prefix(),
            hops.iter()
                .map(|(f, c)| NextHop {
                    face: FaceId(*f),
                    cost_us: *c,
                })
                .collect(),
        )
    }

    #[test]
    fn best_route_picks_min_cost() {
        let e = entry(&[(2, 10_000), (3, 20_000)]);
        assert_eq!(best_route(&e, None), Ok(FaceId(2)));
    }

    #[test]
    fn best_route_ties_break_to_lower_face() {
        let e = entry(&[(3, 10_000), (2, 10_000)]);
        assert_eq!(best_route(&e, None), Ok(FaceId(2)));
    }

    #[test]
    fn best_route_cannot_backtrack() {
        let e = entry(&[(2, 10_000)]);
        assert_eq!(best_route(&e, Some(FaceId(2))), Err(NoRoute));
    }

    #[test]
    fn session_pin_is_stable_across_samples() {
        let e = entry(&[(1, 10), (2, 10)]);
        let mut state = SessionPinState::new();
        let first = session_pin(&mut state, &[0xaa], 7, &e, None).unwrap();
        for _ in 0..4 {
            assert_eq!(
                session_pin(&mut state, &[0xaa], 7, &e, None).unwrap(),
                first
            );
        }
    }

    #[test]
    fn session_pin_spreads_sessions_over_faces() {
        // brute-force the pin map for 100 sessions over two faces
        let e = entry(&[(1, 10), (2, 10)]);
        let mut state = SessionPinState::new();
        let mut counts = [0usize; 2];
        for session in 0..100 {
            match session_pin(&mut state, &[0xaa], session, &e, None).unwrap() {
                FaceId(1) => counts[0] += 1,
                FaceId(2) => counts[1] += 1,
                other => panic!("unexpected face {other}"),
            }
        }
        assert!(counts[0] > 0 && counts[1] > 0, "counts {counts:?}");
        // the pin index must agree with the published mapping
        let mut check = SessionPinState::new();
        for session in 0..100 {
            let expect = if h64(&[0xaa], session).is_multiple_of(2) {
                FaceId(1)
            } else {
                FaceId(2)
            };
            assert_eq!(
                session_pin(&mut check, &[0xaa], session, &e, None).unwrap(),
                expect
            );
        }
    }

    #[test]
    fn session_repins_when_face_disappears() {
        let both = entry(&[(1, 10), (2, 10)]);
        let mut state = SessionPinState::new();
        // find a session pinned to face 2, then drop face 2 from the FIB
        let session = (0..100)
            .find(|&s| session_pin(&mut state, &[1], s, &both, None).unwrap() == FaceId(2))
            .expect("some session pins to face 2");
        let only_one = entry(&[(1, 10)]);
        assert_eq!(
            session_pin(&mut state, &[1], session, &only_one, None).unwrap(),
            FaceId(1)
        );
        // and the re-pin sticks
        assert_eq!(
            session_pin(&mut state, &[1], session, &only_one, None).unwrap(),
            FaceId(1)
        );
    }

    #[test]
    fn hop_limit_far_then_near() {
        let e = entry(&[(1, 10_000), (2, 40_000)]);
        assert_eq!(hop_limit_choose(3, 1, &e, None), Ok(FaceId(2)));
        assert_eq!(hop_limit_choose(1, 1, &e, None), Ok(FaceId(1)));
        assert_eq!(hop_limit_choose(0, 1, &e, None), Ok(FaceId(1)));
    }

    #[test]
    fn hop_limit_at_or_below_threshold_equals_best_route() {
        let entries = [
            entry(&[(1, 5), (2, 9), (3, 9)]),
            entry(&[(4, 100)]),
            entry(&[(1, 7), (9, 3)]),
        ];
        for e in &entries {
            for remaining in 0..=3u8 {
                assert_eq!(hop_limit_choose(remaining, 3, e, None), best_route(e, None));
            }
        }
    }

    #[test]
    fn probabilistic_boundaries() {
        let e = entry(&[(1, 10_000), (2, 40_000)]);
        let mut rng = RngStream::new(42, Scope::Node(0), "strategy");
        for _ in 0..100 {
            assert_eq!(
                probabilistic_choose(1_000_000, &e, None, &mut rng),
                Ok(FaceId(1))
            );
            assert_eq!(probabilistic_choose(0, &e, None, &mut rng), Ok(FaceId(2)));
        }
    }

    #[test]
    fn probabilistic_matches_binomial_within_4_sigma() {
        let e = entry(&[(1, 10_000), (2, 40_000)]);
        for &p in &[100_000u32, 300_000, 500_000] {
            let mut rng = RngStream::new(42, Scope::Node(7), "strategy");
            let n = 10_000u32;
            let mut low = 0u32;
            for _ in 0..n {
                if probabilistic_choose(p, &e, None, &mut rng).unwrap() == FaceId(1) {
                    low += 1;
                }
            }
            let pf = p as f64 / 1_000_000.0;
            let sigma = (pf * (1.0 - pf) / n as f64).sqrt();
            let frac = low as f64 / n as f64;
            assert!(
                (frac - pf).abs() <= 4.0 * sigma,
                "p={pf} frac={frac} sigma={sigma}"
            );
        }
    }

    #[test]
    fn multicast_returns_all_eligible_sorted() {
        let e = entry(&[(3, 30), (1, 10), (2, 20)]);
        assert_eq!(
            multicast_choose(&e, None).unwrap(),
            vec![FaceId(1), FaceId(2), FaceId(3)]
        );
        assert_eq!(
            multicast_choose(&e, Some(FaceId(2))).unwrap(),
            vec![FaceId(1), FaceId(3)]
        );
    }

    #[test]
    fn multicast_session_list_dedups() {
        let e = entry(&[(1, 10), (2, 10), (3, 10)]);
        let mut state = SessionPinState::new();
        // brute-force the expected pin map first
        let expected: Vec<FaceId> = {
            let mut faces = Vec::new();
            for s in [0u64, 1, 2] {
                let idx = (h64(&[0xcc], s) % 3) as usize;
                let f = [FaceId(1), FaceId(2), FaceId(3)][idx];
                if !faces.contains(&f) {
                    faces.push(f);
                }
            }
            faces.sort();
            faces
        };
        let got = multicast_sessions(&mut state, &[0xcc], &[0, 1, 2], &e, None).unwrap();
        assert_eq!(got, expected);
        // stable across repeat calls (samples)
        let again = multicast_sessions(&mut state, &[0xcc], &[0, 1, 2], &e, None).unwrap();
        assert_eq!(again, got);
    }

    #[test]
    fn two_sessions_on_same_face_collapse() {
        let e = entry(&[(1, 10)]);
        let mut state = SessionPinState::new();
        let faces = multicast_sessions(&mut state, &[0xdd], &[0, 1], &e, None).unwrap();
        assert_eq!(faces, vec![FaceId(1)]);
    }

    #[test]
    fn strategies_never_return_incoming_face() {
        let e = entry(&[(1, 10), (2, 20)]);
        let mut rng = RngStream::new(1, Scope::Node(0), "strategy");
        let mut pins = SessionPinState::new();
        for _ in 0..50 {
            let f = probabilistic_choose(500_000, &e, Some(FaceId(1)), &mut rng).unwrap();
            assert_ne!(f, FaceId(1));
        }
        assert_ne!(best_route(&e, Some(FaceId(1))).unwrap(), FaceId(1));
        assert_ne!(
            session_pin(&mut pins, &[1], 0, &e, Some(FaceId(1))).unwrap(),
            FaceId(1)
        );
    }
}
