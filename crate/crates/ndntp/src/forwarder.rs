//! The per-node forwarding pipeline: dead-nonce check, rate limit, hop-limit
//! accounting, content store, optional in-network responder, PIT with three
//! consumption modes, and strategy dispatch.
//!
//! Interest checks run in a fixed order: duplicate nonce, rate limit,
//! hop-limit decrement, CS lookup, responder, PIT insert/aggregate, strategy
//! choice. An Interest is never forwarded out its incoming face, and at most
//! one CS or responder Data is emitted per Interest.

use std::collections::{BTreeMap, HashMap};

use crate::auth::KeyTable;
use crate::clock::ClockModel;
use crate::cs::{ContentStore, CsLookup, CsPolicy};
use crate::fib::Fib;
use crate::ids::{FaceId, NodeId};
use crate::name::{parse_ndntp_name, Name};
use crate::offset::NdntpPayload;
use crate::packet::{data_signing_bytes, Data, DataPayload, InnerResponse, Interest};
use crate::pit::{PitEntry, PitMode, PitTable};
use crate::rate::{RateDecision, RateLimitConfig, RateLimiter};
use crate::strategy::{
    best_route, hop_limit_choose, multicast_choose, multicast_sessions, probabilistic_choose,
    session_pin, SessionPinState, StrategyKind,
};

pub const DEFAULT_DEAD_NONCE_TTL_US: u64 = 6_000_000;
pub const DEFAULT_AGG_TIMEOUT_US: u64 = 1_000_000;
pub const DEFAULT_CS_CAPACITY: usize = 1024;

#[derive(Debug, Clone)]
pub struct ResponderConfig {
    pub max_age_us: u64,
}

#[derive(Debug, Clone)]
pub struct ForwarderConfig {
    pub pit_mode: PitMode,
    pub cs_capacity: usize,
    pub cs_policy: CsPolicy,
    pub responder: Option<ResponderConfig>,
    pub passive_sync: bool,
    pub rate_limit: Option<RateLimitConfig>,
    pub dead_nonce_ttl_us: u64,
    pub agg_timeout_us: u64,
}

impl Default for ForwarderConfig {
    fn default() -> Self {
        ForwarderConfig {
            pit_mode: PitMode::Standard,
            cs_capacity: DEFAULT_CS_CAPACITY,
            cs_policy: CsPolicy::CacheAll,
            responder: None,
            passive_sync: false,
            rate_limit: None,
            dead_nonce_ttl_us: DEFAULT_DEAD_NONCE_TTL_US,
            agg_timeout_us: DEFAULT_AGG_TIMEOUT_US,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    DuplicateNonce,
    RateLimited,
    HopLimitExhausted,
    NoRoute,
    Unsolicited,
    PitConsumed,
    BrokenLabel,
}

impl DropReason {
    pub fn label(&self) -> &'static str {
        match self {
            DropReason::DuplicateNonce => "duplicate-nonce",
            DropReason::RateLimited => "rate-limited",
            DropReason::HopLimitExhausted => "hop-limit-exhausted",
            DropReason::NoRoute => "no-route",
            DropReason::Unsolicited => "unsolicited",
            DropReason::PitConsumed => "pit-consumed",
            DropReason::BrokenLabel => "broken-label",
        }
    }
}

/// Where an outgoing Data came from, for the audit trail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataOrigin {
    Forwarded,
    Cache,
    Responder,
    Aggregated,
}

#[derive(Debug, Clone)]
pub enum AuditNote {
    CsHit {
        name: Name,
        age_us: u64,
        freshness_us: u64,
        must_be_fresh: bool,
    },
    PitAggregated {
        name: Name,
        face: FaceId,
    },
    Pinned {
        name: Name,
        session: u64,
        face: FaceId,
    },
    PassiveSync {
        estimate_us: i64,
    },
}

#[derive(Debug, Clone)]
pub enum Action {
    SendInterest {
        face: FaceId,
        interest: Interest,
    },
    SendData {
        face: FaceId,
        data: Data,
        origin: DataOrigin,
    },
    DropInterest {
        interest: Interest,
        reason: DropReason,
    },
    DropData {
        data: Data,
        reason: DropReason,
    },
    SchedulePitExpiry {
        name: Name,
        at: u64,
    },
    ScheduleAggDeadline {
        name: Name,
        at: u64,
    },
    Note(AuditNote),
}

/// A forwarder's passively learned notion of the current time.
#[derive(Debug, Clone, Copy)]
pub struct TimeEstimate {
    pub correction_us: i64,
    pub last_sync_us: u64,
    pub stratum: u32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwarderCounters {
    pub cache_hits: u64,
    pub pit_aggregations: u64,
    pub flow_balance_violations: u64,
    pub dropped_interests: u64,
    pub dropped_data: u64,
}

#[derive(Debug)]
pub struct Forwarder {
    pub node: NodeId,
    pub cfg: ForwarderConfig,
    pub fib: Fib,
    pit: PitTable,
    cs: ContentStore,
    dead_nonces: HashMap<(Name, u64), u64>,
    pins: SessionPinState,
    strategies: Vec<(Name, StrategyKind)>,
    strategy_rng: crate::sim::rng::RngStream,
    fanout_rng: crate::sim::rng::RngStream,
    limiter: Option<RateLimiter>,
    /// face → adjacent node, for label forwarding.
    neighbors: BTreeMap<FaceId, NodeId>,
    clock: ClockModel,
    pub estimate: Option<TimeEstimate>,
    pub counters: ForwarderCounters,
}

impl Forwarder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        node: NodeId,
        cfg: ForwarderConfig,
        fib: Fib,
        strategies: Vec<(Name, StrategyKind)>,
        neighbors: BTreeMap<FaceId, NodeId>,
        clock: ClockModel,
        strategy_rng: crate::sim::rng::RngStream,
        fanout_rng: crate::sim::rng::RngStream,
    ) -> Self {
        let mut strategies = strategies;
        strategies.sort_by_key(|(prefix, _)| std::cmp::Reverse(prefix.len()));
        Forwarder {
            node,
            cs: ContentStore::new(cfg.cs_capacity, cfg.cs_policy),
            limiter: cfg.rate_limit.clone().map(RateLimiter::new),
            cfg,
            fib,
            pit: PitTable::new(),
            dead_nonces: HashMap::new(),
            pins: SessionPinState::new(),
            strategies,
            strategy_rng,
            fanout_rng,
            neighbors,
            clock,
            estimate: None,
            counters: ForwarderCounters::default(),
        }
    }

    fn strategy_for(&self, name: &Name) -> StrategyKind {
        self.strategies
            .iter()
            .find(|(prefix, _)| prefix.is_prefix_of(name))
            .map(|(_, kind)| *kind)
            .unwrap_or_default()
    }

    /// The forwarder's current time estimate, if passive sync has run.
    pub fn estimated_time(&self, now: u64) -> Option<i64> {
        self.estimate
            .map(|e| self.clock.local_time(now) + e.correction_us)
    }

    pub fn process_interest(
        &mut self,
        in_face: FaceId,
        mut interest: Interest,
        now: u64,
        keys: &KeyTable,
    ) -> Vec<Action> {
        let mut actions = Vec::new();

        // path discovery: record the nodes the Interest travels through
        if !in_face.is_app() {
            if let Some(record) = interest.discovery_record.as_mut() {
                record.push(self.node);
            }
        }

        // 1. duplicate nonce
        let nonce_key = (interest.name.clone(), interest.nonce);
        if let Some(&seen) = self.dead_nonces.get(&nonce_key) {
            if now.saturating_sub(seen) <= self.cfg.dead_nonce_ttl_us {
                self.counters.dropped_interests += 1;
                actions.push(Action::DropInterest {
                    interest,
                    reason: DropReason::DuplicateNonce,
                });
                return actions;
            }
        }
        self.dead_nonces.insert(nonce_key, now);
        if self.dead_nonces.len() > 4096 {
            let ttl = self.cfg.dead_nonce_ttl_us;
            self.dead_nonces
                .retain(|_, &mut t| now.saturating_sub(t) <= ttl);
        }

        // 2. rate limit (network-face traffic only)
        if !in_face.is_app() {
            if let Some(limiter) = self.limiter.as_mut() {
                if limiter.check(&interest.name, now) == RateDecision::Deny {
                    self.counters.dropped_interests += 1;
                    actions.push(Action::DropInterest {
                        interest,
                        reason: DropReason::RateLimited,
                    });
                    return actions;
                }
            }
        }

        // 3. hop-limit decrement; an Interest arriving with 0 goes no further
        if !in_face.is_app() {
            if let Some(h) = interest.hop_limit {
                if h == 0 {
                    self.counters.dropped_interests += 1;
                    actions.push(Action::DropInterest {
                        interest,
                        reason: DropReason::HopLimitExhausted,
                    });
                    return actions;
                }
                interest.hop_limit = Some(h - 1);
            }
        }

        // 4. content store
        if let CsLookup::Hit(entry) = self.cs.lookup(&interest.name, interest.must_be_fresh, now) {
            self.counters.cache_hits += 1;
            actions.push(Action::Note(AuditNote::CsHit {
                name: interest.name.clone(),
                age_us: entry.age(now),
                freshness_us: entry.data.freshness_period_us,
                must_be_fresh: interest.must_be_fresh,
            }));
            actions.push(Action::SendData {
                face: in_face,
                data: entry.data.clone(),
                origin: DataOrigin::Cache,
            });
            return actions;
        }

        // 5. responder mode
        if let Some(data) = self.responder_answer(&interest, now, keys) {
            actions.push(Action::SendData {
                face: in_face,
                data,
                origin: DataOrigin::Responder,
            });
            return actions;
        }

        // 6. PIT aggregation
        if let Some(entry) = self.pit.get_mut(&interest.name) {
            entry.add_in(in_face, interest.nonce, now);
            self.counters.pit_aggregations += 1;
            actions.push(Action::Note(AuditNote::PitAggregated {
                name: interest.name.clone(),
                face: in_face,
            }));
            return actions;
        }

        // 7. outgoing faces: label bypass or strategy over the FIB
        let faces = match self.choose_faces(&interest, in_face, &mut actions) {
            Ok(faces) => faces,
            Err(reason) => {
                self.counters.dropped_interests += 1;
                actions.push(Action::DropInterest { interest, reason });
                return actions;
            }
        };

        // 8. PIT entry and out-records
        let expiry = now + interest.lifetime_us;
        let mut entry = PitEntry::new(interest.name.clone(), expiry);
        entry.add_in(in_face, interest.nonce, now);
        for face in &faces {
            entry.add_out(*face, now);
        }
        // the deadline is scheduled ahead of the expiry so that when the two
        // tie, the partial flush runs before the entry disappears
        if self.cfg.pit_mode == PitMode::Aggregate {
            let deadline = expiry.min(now + self.cfg.agg_timeout_us);
            entry.agg_deadline_us = deadline;
            actions.push(Action::ScheduleAggDeadline {
                name: interest.name.clone(),
                at: deadline,
            });
        }
        actions.push(Action::SchedulePitExpiry {
            name: interest.name.clone(),
            at: expiry,
        });
        self.pit.insert(entry);
        for (idx, face) in faces.into_iter().enumerate() {
            let mut copy = interest.clone();
            // discovery copies fanning out toward a shared server would be
            // dropped as loop duplicates where the paths converge; give each
            // extra copy its own nonce so every path's record survives
            if idx > 0 && copy.discovery_record.is_some() {
                copy.nonce = self.fanout_rng.next_nonce();
            }
            actions.push(Action::SendInterest {
                face,
                interest: copy,
            });
        }
        actions
    }

    fn choose_faces(
        &mut self,
        interest: &Interest,
        in_face: FaceId,
        actions: &mut Vec<Action>,
    ) -> Result<Vec<FaceId>, DropReason> {
        if let Some(label) = interest.path_label.as_deref() {
            if let Some(face) = self.label_successor_face(label)? {
                return Ok(vec![face]);
            }
            // terminus of the label: fall through to the FIB (local app)
        }

        let entry = match self.fib.lookup(&interest.name) {
            Some(e) => e.clone(),
            None => return Err(DropReason::NoRoute),
        };
        let kind = self.strategy_for(&interest.name);
        let (faces, new_pin) = dispatch_strategy(
            kind,
            interest,
            &entry,
            Some(in_face),
            &mut self.pins,
            &mut self.strategy_rng,
        )
        .map_err(|_| DropReason::NoRoute)?;
        if let Some((session, face)) = new_pin {
            actions.push(Action::Note(AuditNote::Pinned {
                name: interest.name.clone(),
                session,
                face,
            }));
        }
        Ok(faces)
    }

    fn label_successor_face(&self, label: &[NodeId]) -> Result<Option<FaceId>, DropReason> {
        label_successor_face(self.node, label, &self.neighbors)
    }

    /// Answers from the forwarder's own passively learned clock when the
    /// estimate is recent enough; declines otherwise.
    pub fn responder_answer(&self, interest: &Interest, now: u64, keys: &KeyTable) -> Option<Data> {
        let responder = self.cfg.responder.as_ref()?;
        if !interest.name.is_ndntp() {
            return None;
        }
        let estimate = self.estimate?;
        if now.saturating_sub(estimate.last_sync_us) > responder.max_age_us {
            return None;
        }
        let t = self.clock.local_time(now) + estimate.correction_us;
        let payload = NdntpPayload {
            t2_receive_us: t,
            t3_transmit_us: t,
            stratum: estimate.stratum,
            server: self.node,
            echo_of_name: interest.name.clone(),
        };
        let payload = DataPayload::Single(payload);
        let signature = keys.sign(self.node, &data_signing_bytes(&interest.name, &payload));
        Some(Data {
            name: interest.name.clone(),
            freshness_period_us: 0,
            payload,
            signature,
            producer: self.node,
            path_record: interest.discovery_record.clone(),
        })
    }

    pub fn process_data(
        &mut self,
        in_face: FaceId,
        data: Data,
        now: u64,
        keys: &KeyTable,
    ) -> Vec<Action> {
        let mut actions = Vec::new();
        let name = data.name.clone();

        let Some(entry) = self.pit.get_mut(&name) else {
            let reason = if self
                .pit
                .recently_consumed(&name, now, self.cfg.dead_nonce_ttl_us)
            {
                DropReason::PitConsumed
            } else {
                DropReason::Unsolicited
            };
            self.counters.dropped_data += 1;
            actions.push(Action::DropData { data, reason });
            return actions;
        };

        entry.received_responses += 1;
        match self.cfg.pit_mode {
            PitMode::Standard => {
                let faces = entry.downstream_faces();
                let consumed = self.pit.consume(&name, now).expect("entry present");
                for face in faces {
                    if face != in_face {
                        actions.push(Action::SendData {
                            face,
                            data: data.clone(),
                            origin: DataOrigin::Forwarded,
                        });
                    }
                }
                drop(consumed);
                self.after_forward(&data, now, &mut actions);
            }
            PitMode::Aggregate => {
                match &data.payload {
                    DataPayload::Single(p) => entry.agg_buffer.push(InnerResponse {
                        payload: p.clone(),
                        producer: data.producer,
                        signature: data.signature,
                    }),
                    DataPayload::Aggregate { parts, .. } => {
                        entry.agg_buffer.extend(parts.iter().cloned())
                    }
                }
                if entry.received_responses >= entry.expected_responses {
                    let entry = self.pit.consume(&name, now).expect("entry present");
                    let aggregate = self
                        .aggregate_responses(&entry, now, keys)
                        .expect("buffer non-empty");
                    for face in entry.downstream_faces() {
                        if face != in_face {
                            actions.push(Action::SendData {
                                face,
                                data: aggregate.clone(),
                                origin: DataOrigin::Aggregated,
                            });
                        }
                    }
                }
                self.after_forward(&data, now, &mut actions);
            }
            PitMode::MultiResponse => {
                let faces = entry.downstream_faces();
                for face in faces {
                    if face != in_face {
                        let n = entry.emissions.entry(face).or_insert(0);
                        *n += 1;
                        if *n > 1 {
                            self.counters.flow_balance_violations += 1;
                        }
                        actions.push(Action::SendData {
                            face,
                            data: data.clone(),
                            origin: DataOrigin::Forwarded,
                        });
                    }
                }
                if entry.received_responses >= entry.expected_responses {
                    self.pit.consume(&name, now);
                }
                self.after_forward(&data, now, &mut actions);
            }
        }
        actions
    }

    /// CS insertion and passive sync for a Data this node forwarded.
    fn after_forward(&mut self, data: &Data, now: u64, actions: &mut Vec<Action>) {
        self.cs.insert(data.clone(), now);
        if self.cfg.passive_sync {
            if let DataPayload::Single(p) = &data.payload {
                let correction = p.t3_transmit_us - self.clock.local_time(now);
                self.estimate = Some(TimeEstimate {
                    correction_us: correction,
                    last_sync_us: now,
                    stratum: p.stratum + 1,
                });
                actions.push(Action::Note(AuditNote::PassiveSync {
                    estimate_us: p.t3_transmit_us,
                }));
            }
        }
    }

    /// Builds the combined Data for a PIT entry's buffered responses.
    pub fn aggregate_responses(
        &self,
        entry: &PitEntry,
        _now: u64,
        keys: &KeyTable,
    ) -> Result<Data, EmptyBuffer> {
        if entry.agg_buffer.is_empty() {
            return Err(EmptyBuffer);
        }
        let payload = DataPayload::Aggregate {
            parts: entry.agg_buffer.clone(),
            partial: entry.received_responses < entry.expected_responses,
        };
        let signature = keys.sign(self.node, &data_signing_bytes(&entry.name, &payload));
        Ok(Data {
            name: entry.name.clone(),
            freshness_period_us: 0,
            payload,
            signature,
            producer: self.node,
            path_record: None,
        })
    }

    /// Aggregation deadline passed: flush whatever arrived as a partial
    /// aggregate. With an empty buffer the entry just waits for expiry.
    pub fn on_agg_deadline(&mut self, name: &Name, now: u64, keys: &KeyTable) -> Vec<Action> {
        let mut actions = Vec::new();
        let Some(entry) = self.pit.get(name) else {
            return actions;
        };
        if entry.agg_deadline_us > now || entry.agg_buffer.is_empty() {
            return actions;
        }
        let entry = self.pit.consume(name, now).expect("entry present");
        let aggregate = self
            .aggregate_responses(&entry, now, keys)
            .expect("buffer checked non-empty");
        for face in entry.downstream_faces() {
            actions.push(Action::SendData {
                face,
                data: aggregate.clone(),
                origin: DataOrigin::Aggregated,
            });
        }
        actions
    }

    pub fn on_pit_expiry(&mut self, name: &Name, now: u64) {
        if let Some(entry) = self.pit.get(name) {
            if entry.expiry_us <= now {
                self.pit.expire(name);
            }
        }
    }

    pub fn pit_len(&self) -> usize {
        self.pit.len()
    }

    pub fn cs_len(&self) -> usize {
        self.cs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("aggregation buffer is empty")]
pub struct EmptyBuffer;

/// Chosen faces plus the (session, face) of a freshly created session pin.
pub type StrategyChoice = (Vec<FaceId>, Option<(u64, FaceId)>);

/// Applies a strategy to one Interest over one FIB entry. Interests missing
/// what a strategy needs (a parseable name, a probability, a hop limit)
/// fall back to best-route.
pub fn dispatch_strategy(
    kind: StrategyKind,
    interest: &Interest,
    entry: &crate::fib::FibEntry,
    in_face: Option<FaceId>,
    pins: &mut SessionPinState,
    rng: &mut crate::sim::rng::RngStream,
) -> Result<StrategyChoice, crate::strategy::NoRoute> {
    let parsed = parse_ndntp_name(&interest.name).ok();
    match kind {
        StrategyKind::BestRoute | StrategyKind::PathLabel => {
            best_route(entry, in_face).map(|f| (vec![f], None))
        }
        StrategyKind::SessionPin => match parsed {
            Some(p) => {
                let had_pin = pins.get(&p.hash, p.session);
                session_pin(pins, &p.hash, p.session, entry, in_face).map(|f| {
                    let note = (had_pin != Some(f)).then_some((p.session, f));
                    (vec![f], note)
                })
            }
            None => best_route(entry, in_face).map(|f| (vec![f], None)),
        },
        StrategyKind::HopLimit { threshold } => match interest.hop_limit {
            Some(remaining) => {
                hop_limit_choose(remaining, threshold, entry, in_face).map(|f| (vec![f], None))
            }
            None => best_route(entry, in_face).map(|f| (vec![f], None)),
        },
        StrategyKind::Probabilistic => match parsed.as_ref().and_then(|p| p.probability_ppm) {
            Some(ppm) => probabilistic_choose(ppm, entry, in_face, rng).map(|f| (vec![f], None)),
            None => best_route(entry, in_face).map(|f| (vec![f], None)),
        },
        StrategyKind::Multicast => match (&interest.session_list, parsed) {
            (Some(sessions), Some(p)) => {
                multicast_sessions(pins, &p.hash, sessions, entry, in_face).map(|f| (f, None))
            }
            _ => multicast_choose(entry, in_face).map(|f| (f, None)),
        },
    }
}

/// Face toward the next node named in a path label, `Ok(None)` when
/// `self_node` is the label terminus. A node that does not appear in the
/// label enters it at its first hop.
pub fn label_successor_face(
    self_node: NodeId,
    label: &[NodeId],
    neighbors: &BTreeMap<FaceId, NodeId>,
) -> Result<Option<FaceId>, DropReason> {
    let successor = match label.iter().position(|n| *n == self_node) {
        Some(pos) => match label.get(pos + 1) {
            Some(next) => *next,
            None => return Ok(None),
        },
        None => match label.first() {
            Some(first) => *first,
            None => return Err(DropReason::BrokenLabel),
        },
    };
    neighbors
        .iter()
        .find(|(_, peer)| **peer == successor)
        .map(|(face, _)| Some(*face))
        .ok_or(DropReason::BrokenLabel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::KeyTable;
    use crate::fib::{FibEntry, NextHop};
    use crate::name::{build_ndntp_name, Decorations};
    use crate::sim::rng::{RngStream, Scope};

    fn keys_for(ids: &[u32]) -> KeyTable {
        let mut t = KeyTable::new();
        for id in ids {
            t.register(NodeId(*id), *id as u64, 1000 + *id as u64);
        }
        t
    }

    fn fwd(node: u32, hops: &[(u32, u64)], cfg: ForwarderConfig) -> Forwarder {
        let fib = Fib::new(vec![FibEntry::new(
            Name::ndntp_prefix(),
            hops.iter()
                .map(|(f, c)| NextHop {
                    face: FaceId(*f),
                    cost_us: *c,
                })
                .collect(),
        )]);
        Forwarder::new(
            NodeId(node),
            cfg,
            fib,
            vec![(Name::ndntp_prefix(), StrategyKind::Multicast)],
            BTreeMap::new(),
            ClockModel::default(),
            RngStream::new(1, Scope::Node(node), "strategy"),
            RngStream::new(1, Scope::Node(node), "fanout-nonce"),
        )
    }

    fn interest(sample: u64, nonce: u64) -> Interest {
        let name = build_ndntp_name(&[0xab], 0, sample, Decorations::default()).unwrap();
        Interest::new(name, nonce)
    }

    fn data_for(interest: &Interest, server: u32, keys: &KeyTable) -> Data {
        let payload = DataPayload::Single(NdntpPayload {
            t2_receive_us: 100,
            t3_transmit_us: 100,
            stratum: 1,
            server: NodeId(server),
            echo_of_name: interest.name.clone(),
        });
        let signature = keys.sign(
            NodeId(server),
            &data_signing_bytes(&interest.name, &payload),
        );
        Data {
            name: interest.name.clone(),
            freshness_period_us: 0,
            payload,
            signature,
            producer: NodeId(server),
            path_record: None,
        }
    }

    fn sent_interest_faces(actions: &[Action]) -> Vec<u32> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::SendInterest { face, .. } => Some(face.0),
                _ => None,
            })
            .collect()
    }

    fn sent_data_faces(actions: &[Action]) -> Vec<u32> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::SendData { face, .. } => Some(face.0),
                _ => None,
            })
            .collect()
    }

    fn drop_reason(actions: &[Action]) -> Option<DropReason> {
        actions.iter().find_map(|a| match a {
            Action::DropInterest { reason, .. } => Some(*reason),
            Action::DropData { reason, .. } => Some(*reason),
            _ => None,
        })
    }

    #[test]
    fn duplicate_nonce_dropped_within_ttl() {
        let keys = keys_for(&[0]);
        let mut f = fwd(0, &[(2, 10)], ForwarderConfig::default());
        let i = interest(0, 7);
        let first = f.process_interest(FaceId(1), i.clone(), 0, &keys);
        assert_eq!(sent_interest_faces(&first), vec![2]);
        let second = f.process_interest(FaceId(1), i, 100, &keys);
        assert_eq!(drop_reason(&second), Some(DropReason::DuplicateNonce));
    }

    #[test]
    fn stale_cached_entry_misses_must_be_fresh() {
        let keys = keys_for(&[0, 9]);
        let mut f = fwd(0, &[(2, 10)], ForwarderConfig::default());
        let i = interest(0, 1);
        f.process_interest(FaceId(1), i.clone(), 0, &keys);
        let d = data_for(&i, 9, &keys);
        f.process_data(FaceId(2), d, 10, &keys);
        // freshness 0: instantly stale, so a fresh-requiring Interest is
        // forwarded upstream instead of served from cache
        let mut retry = interest(0, 2);
        retry.must_be_fresh = true;
        let actions = f.process_interest(FaceId(1), retry, 20, &keys);
        assert_eq!(sent_interest_faces(&actions), vec![2]);
        assert_eq!(f.counters.cache_hits, 0);
    }

    #[test]
    fn concurrent_same_name_interests_aggregate() {
        let keys = keys_for(&[0]);
        let mut f = fwd(0, &[(3, 10)], ForwarderConfig::default());
        let a = f.process_interest(FaceId(1), interest(0, 1), 0, &keys);
        assert_eq!(sent_interest_faces(&a), vec![3]);
        let b = f.process_interest(FaceId(2), interest(0, 2), 5, &keys);
        assert!(sent_interest_faces(&b).is_empty());
        assert_eq!(f.counters.pit_aggregations, 1);
        // the eventual Data reaches both downstream faces
        let d = data_for(&interest(0, 1), 9, &keys_for(&[9]));
        let out = f.process_data(FaceId(3), d, 10, &keys);
        assert_eq!(sent_data_faces(&out), vec![1, 2]);
    }

    #[test]
    fn standard_mode_first_data_consumes() {
        let keys = keys_for(&[0, 11, 12, 13]);
        let mut f = fwd(0, &[(2, 10), (3, 20), (4, 30)], ForwarderConfig::default());
        let i = interest(0, 1);
        let out = f.process_interest(FaceId(1), i.clone(), 0, &keys);
        assert_eq!(sent_interest_faces(&out), vec![2, 3, 4]);

        let first = f.process_data(FaceId(2), data_for(&i, 11, &keys), 10, &keys);
        assert_eq!(sent_data_faces(&first), vec![1]);
        let late = f.process_data(FaceId(3), data_for(&i, 12, &keys), 20, &keys);
        assert_eq!(drop_reason(&late), Some(DropReason::PitConsumed));
        let later = f.process_data(FaceId(4), data_for(&i, 13, &keys), 30, &keys);
        assert_eq!(drop_reason(&later), Some(DropReason::PitConsumed));
        assert_eq!(f.counters.flow_balance_violations, 0);
    }

    #[test]
    fn aggregate_mode_buffers_until_complete() {
        let keys = keys_for(&[0, 11, 12, 13]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::Aggregate,
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10), (3, 20), (4, 30)], cfg);
        let i = interest(0, 1);
        f.process_interest(FaceId(1), i.clone(), 0, &keys);

        assert!(
            sent_data_faces(&f.process_data(FaceId(2), data_for(&i, 11, &keys), 10, &keys))
                .is_empty()
        );
        assert!(
            sent_data_faces(&f.process_data(FaceId(3), data_for(&i, 12, &keys), 20, &keys))
                .is_empty()
        );
        let done = f.process_data(FaceId(4), data_for(&i, 13, &keys), 30, &keys);
        let sent: Vec<&Data> = done
            .iter()
            .filter_map(|a| match a {
                Action::SendData { data, .. } => Some(data),
                _ => None,
            })
            .collect();
        assert_eq!(sent.len(), 1);
        match &sent[0].payload {
            DataPayload::Aggregate { parts, partial } => {
                assert_eq!(parts.len(), 3);
                assert!(!partial);
                // arrival order preserved
                assert_eq!(
                    parts.iter().map(|p| p.producer.0).collect::<Vec<_>>(),
                    vec![11, 12, 13]
                );
            }
            other => panic!("expected aggregate, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_deadline_flushes_partial() {
        let keys = keys_for(&[0, 11]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::Aggregate,
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10), (3, 20), (4, 30)], cfg);
        let i = interest(0, 1);
        let setup = f.process_interest(FaceId(1), i.clone(), 0, &keys);
        let deadline = setup
            .iter()
            .find_map(|a| match a {
                Action::ScheduleAggDeadline { at, .. } => Some(*at),
                _ => None,
            })
            .unwrap();
        assert_eq!(deadline, DEFAULT_AGG_TIMEOUT_US);

        f.process_data(FaceId(2), data_for(&i, 11, &keys), 10, &keys);
        let flushed = f.on_agg_deadline(&i.name, deadline, &keys);
        let sent: Vec<&Data> = flushed
            .iter()
            .filter_map(|a| match a {
                Action::SendData { data, .. } => Some(data),
                _ => None,
            })
            .collect();
        assert_eq!(sent.len(), 1);
        assert!(matches!(
            &sent[0].payload,
            DataPayload::Aggregate { parts, partial: true } if parts.len() == 1
        ));
    }

    #[test]
    fn deadline_precedes_expiry_when_they_tie() {
        // agg timeout longer than the Interest lifetime: the deadline clamps
        // to the expiry and must be scheduled first so the flush wins
        let keys = keys_for(&[0, 11]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::Aggregate,
            agg_timeout_us: 10_000_000,
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10), (3, 20)], cfg);
        let i = interest(0, 1);
        let setup = f.process_interest(FaceId(1), i.clone(), 0, &keys);
        let schedules: Vec<(&str, u64)> = setup
            .iter()
            .filter_map(|a| match a {
                Action::ScheduleAggDeadline { at, .. } => Some(("deadline", *at)),
                Action::SchedulePitExpiry { at, .. } => Some(("expiry", *at)),
                _ => None,
            })
            .collect();
        assert_eq!(
            schedules,
            vec![("deadline", i.lifetime_us), ("expiry", i.lifetime_us)]
        );

        f.process_data(FaceId(2), data_for(&i, 11, &keys), 10, &keys);
        let flushed = f.on_agg_deadline(&i.name, i.lifetime_us, &keys);
        assert_eq!(sent_data_faces(&flushed), vec![1]);
        // the expiry then finds nothing left
        f.on_pit_expiry(&i.name, i.lifetime_us);
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn aggregating_nothing_is_an_error() {
        let keys = keys_for(&[0]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::Aggregate,
            ..Default::default()
        };
        let f = fwd(0, &[(2, 10)], cfg);
        let entry = crate::pit::PitEntry::new(interest(0, 1).name, 100);
        assert_eq!(f.aggregate_responses(&entry, 0, &keys), Err(EmptyBuffer));
    }

    #[test]
    fn aggregate_of_one_keeps_aggregate_framing() {
        let keys = keys_for(&[0, 11]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::Aggregate,
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10)], cfg);
        let i = interest(0, 1);
        f.process_interest(FaceId(1), i.clone(), 0, &keys);
        let out = f.process_data(FaceId(2), data_for(&i, 11, &keys), 10, &keys);
        let sent: Vec<&Data> = out
            .iter()
            .filter_map(|a| match a {
                Action::SendData { data, .. } => Some(data),
                _ => None,
            })
            .collect();
        assert!(matches!(
            &sent[0].payload,
            DataPayload::Aggregate { parts, partial: false } if parts.len() == 1
        ));
    }

    #[test]
    fn multi_response_forwards_each_and_counts_violations() {
        let keys = keys_for(&[0, 11, 12, 13]);
        let cfg = ForwarderConfig {
            pit_mode: PitMode::MultiResponse,
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10), (3, 20), (4, 30)], cfg);
        let i = interest(0, 1);
        f.process_interest(FaceId(1), i.clone(), 0, &keys);

        for (face, server) in [(2u32, 11u32), (3, 12), (4, 13)] {
            let out = f.process_data(FaceId(face), data_for(&i, server, &keys), 10, &keys);
            assert_eq!(sent_data_faces(&out), vec![1]);
        }
        assert_eq!(f.counters.flow_balance_violations, 2);
        assert_eq!(
            f.pit_len(),
            0,
            "entry consumed after all expected responses"
        );
    }

    #[test]
    fn hop_limit_zero_on_arrival_drops() {
        let keys = keys_for(&[0]);
        let mut f = fwd(0, &[(2, 10)], ForwarderConfig::default());
        let mut i = interest(0, 1);
        i.hop_limit = Some(0);
        let actions = f.process_interest(FaceId(1), i, 0, &keys);
        assert_eq!(drop_reason(&actions), Some(DropReason::HopLimitExhausted));
    }

    #[test]
    fn responder_age_gating() {
        let keys = keys_for(&[0]);
        let cfg = ForwarderConfig {
            responder: Some(ResponderConfig {
                max_age_us: 5_000_000,
            }),
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10)], cfg);
        assert!(f.responder_answer(&interest(0, 1), 0, &keys).is_none());

        f.estimate = Some(TimeEstimate {
            correction_us: 0,
            last_sync_us: 0,
            stratum: 2,
        });
        let fresh = f.responder_answer(&interest(0, 1), 1_000_000, &keys);
        assert_eq!(fresh.unwrap().producer, NodeId(0));
        assert!(f
            .responder_answer(&interest(0, 1), 10_000_000, &keys)
            .is_none());
    }

    #[test]
    fn responder_off_always_declines() {
        let keys = keys_for(&[0]);
        let mut f = fwd(0, &[(2, 10)], ForwarderConfig::default());
        f.estimate = Some(TimeEstimate {
            correction_us: 0,
            last_sync_us: 0,
            stratum: 2,
        });
        assert!(f.responder_answer(&interest(0, 1), 0, &keys).is_none());
    }

    #[test]
    fn broken_label_drops() {
        let keys = keys_for(&[0]);
        let mut neighbors = BTreeMap::new();
        neighbors.insert(FaceId(2), NodeId(5));
        let fib = Fib::new(vec![FibEntry::new(
            Name::ndntp_prefix(),
            vec![NextHop {
                face: FaceId(2),
                cost_us: 10,
            }],
        )]);
        let mut f = Forwarder::new(
            NodeId(0),
            ForwarderConfig::default(),
            fib,
            vec![],
            neighbors,
            ClockModel::default(),
            RngStream::new(1, Scope::Node(0), "strategy"),
            RngStream::new(1, Scope::Node(0), "fanout-nonce"),
        );
        let mut i = interest(0, 1);
        // label says go via node 7, which is not adjacent
        i.path_label = Some(vec![NodeId(0), NodeId(7)]);
        let actions = f.process_interest(FaceId(1), i, 0, &keys);
        assert_eq!(drop_reason(&actions), Some(DropReason::BrokenLabel));

        let mut ok = interest(1, 2);
        ok.path_label = Some(vec![NodeId(0), NodeId(5)]);
        let actions = f.process_interest(FaceId(1), ok, 0, &keys);
        assert_eq!(sent_interest_faces(&actions), vec![2]);
    }

    #[test]
    fn rate_limited_interests_drop() {
        let keys = keys_for(&[0]);
        let cfg = ForwarderConfig {
            rate_limit: Some(RateLimitConfig {
                prefix: Name::ndntp_prefix(),
                rate_per_s: 10,
                burst: 2,
            }),
            ..Default::default()
        };
        let mut f = fwd(0, &[(2, 10)], cfg);
        assert!(drop_reason(&f.process_interest(FaceId(1), interest(0, 1), 0, &keys)).is_none());
        assert!(drop_reason(&f.process_interest(FaceId(1), interest(1, 2), 0, &keys)).is_none());
        assert_eq!(
            drop_reason(&f.process_interest(FaceId(1), interest(2, 3), 0, &keys)),
            Some(DropReason::RateLimited)
        );
    }

    #[test]
    fn unsolicited_data_dropped() {
        let keys = keys_for(&[0, 9]);
        let mut f = fwd(0, &[(2, 10)], ForwarderConfig::default());
        let d = data_for(&interest(0, 1), 9, &keys);
        let actions = f.process_data(FaceId(2), d, 0, &keys);
        assert_eq!(drop_reason(&actions), Some(DropReason::Unsolicited));
    }
}
