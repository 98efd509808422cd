//! The synchronizing client: sends one run of requests (sessions × samples),
//! collects timestamped responses, filters them, and combines the survivors
//! into a single offset estimate.
//!
//! The filter pipeline drops samples that fail signature verification or
//! exceed the round-trip threshold (the delay-attack defense), keeps each
//! server's minimum-delay sample, discards servers whose best offset is an
//! outlier against the median, and reports the median of what remains.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::auth::{KeyTable, SignedEnvelope, Verification};
use crate::clock::ClockModel;
use crate::ids::NodeId;
use crate::name::{build_ndntp_name, Decorations, Name};
use crate::offset::{NdntpPayload, Sample};
use crate::packet::{
    data_signing_bytes, payload_signing_bytes, Data, DataPayload, Interest, DEFAULT_LIFETIME_US,
};
use crate::sim::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("every sample was discarded")]
pub struct NoUsableSamples;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    RttThreshold,
    SignatureFail,
    OffsetOutlier,
}

impl DiscardReason {
    pub fn label(&self) -> &'static str {
        match self {
            DiscardReason::RttThreshold => "rtt-threshold",
            DiscardReason::SignatureFail => "signature-fail",
            DiscardReason::OffsetOutlier => "offset-outlier",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Number of sessions per run; each session aims at one server.
    pub servers_per_run: u64,
    pub samples_per_server: u64,
    pub rtt_threshold_us: u64,
    pub cluster_tolerance_us: u64,
    pub probability_ppm: Option<u32>,
    pub hop_limit: Option<u8>,
    pub use_random_hash: bool,
    pub must_be_fresh: bool,
    pub inter_sample_gap_us: u64,
    pub lifetime_us: u64,
    pub use_path_labels: bool,
    /// Simulation time at which the run starts.
    pub start_at_us: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            servers_per_run: 4,
            samples_per_server: 4,
            rtt_threshold_us: 250_000,
            cluster_tolerance_us: 100_000,
            probability_ppm: None,
            hop_limit: None,
            use_random_hash: true,
            must_be_fresh: true,
            inter_sample_gap_us: 10_000,
            lifetime_us: DEFAULT_LIFETIME_US,
            use_path_labels: false,
            start_at_us: 0,
        }
    }
}

/// A sample along with the envelope and covered bytes it arrived under, so
/// the selection pipeline can verify it against the trust anchors.
#[derive(Debug, Clone)]
pub struct ReceivedSample {
    pub sample: Sample,
    pub envelope: SignedEnvelope,
    pub signed_bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncResult {
    pub combined_offset_us: i64,
    pub surviving_servers: Vec<NodeId>,
    pub discarded: Vec<(NodeId, DiscardReason)>,
    pub per_server_best: Vec<Sample>,
}

/// Lower median: for even counts the lower of the two central values.
fn lower_median(sorted: &[i64]) -> i64 {
    sorted[(sorted.len() - 1) / 2]
}

/// The client's sample selection pipeline. Order: signature check, RTT
/// threshold, per-server best (minimum delay, earliest on ties), offset
/// outlier rejection against the lower median, then the lower median of the
/// surviving best offsets.
pub fn select_and_combine(
    received: &[ReceivedSample],
    cfg: &ClientConfig,
    keys: &KeyTable,
    trust_anchors: &BTreeSet<NodeId>,
) -> Result<SyncResult, NoUsableSamples> {
    let mut discarded = Vec::new();
    let mut usable: Vec<&Sample> = Vec::new();
    for r in received {
        if keys.verify(&r.envelope, &r.signed_bytes, trust_anchors) != Verification::Ok {
            discarded.push((r.sample.server, DiscardReason::SignatureFail));
            continue;
        }
        if r.sample.delay_us as u64 > cfg.rtt_threshold_us {
            discarded.push((r.sample.server, DiscardReason::RttThreshold));
            continue;
        }
        usable.push(&r.sample);
    }

    let mut per_server: BTreeMap<NodeId, &Sample> = BTreeMap::new();
    for s in usable {
        match per_server.get(&s.server) {
            Some(best) if best.delay_us <= s.delay_us => {}
            _ => {
                per_server.insert(s.server, s);
            }
        }
    }
    if per_server.is_empty() {
        return Err(NoUsableSamples);
    }

    let mut offsets: Vec<i64> = per_server.values().map(|s| s.offset_us).collect();
    offsets.sort_unstable();
    let median = lower_median(&offsets);
    let mut survivors: Vec<&Sample> = Vec::new();
    for (server, s) in &per_server {
        if (s.offset_us - median).unsigned_abs() > cfg.cluster_tolerance_us {
            discarded.push((*server, DiscardReason::OffsetOutlier));
        } else {
            survivors.push(s);
        }
    }
    if survivors.is_empty() {
        return Err(NoUsableSamples);
    }

    let mut surviving_offsets: Vec<i64> = survivors.iter().map(|s| s.offset_us).collect();
    surviving_offsets.sort_unstable();
    Ok(SyncResult {
        combined_offset_us: lower_median(&surviving_offsets),
        surviving_servers: survivors.iter().map(|s| s.server).collect(),
        discarded,
        per_server_best: per_server.values().map(|s| (*s).clone()).collect(),
    })
}

#[derive(Debug, Clone)]
struct PendingRequest {
    session: u64,
    sample: u64,
    t1_us: i64,
    responses: u32,
}

/// What the runtime should schedule after a client callback.
#[derive(Debug, Clone, Default)]
pub struct SendPlan {
    /// (fire_at, send index) pairs.
    pub sends: Vec<(u64, u64)>,
    /// When the whole run is complete and the result can be combined.
    pub complete_at: u64,
}

/// Per-response outcome the runtime turns into a metrics row.
#[derive(Debug, Clone)]
pub enum SampleOutcome {
    Accepted {
        session: u64,
        sample: u64,
        server: NodeId,
        rtt_us: i64,
        offset_us: i64,
        parts: u32,
    },
    NegativeDelay {
        session: u64,
        sample: u64,
        server: NodeId,
    },
    DiscoveryRecord,
}

#[derive(Debug)]
pub struct ClientState {
    pub node: NodeId,
    pub cfg: ClientConfig,
    clock: ClockModel,
    target: Decorations,
    run_hash: Vec<u8>,
    discovery_name: Option<Name>,
    discovery_records: Vec<Vec<NodeId>>,
    pub labels: Vec<Vec<NodeId>>,
    pending: HashMap<Name, PendingRequest>,
    pub received: Vec<ReceivedSample>,
    pub negative_delays: u64,
    pub losses: Vec<(u64, u64)>,
    rng: RngStream,
}

impl ClientState {
    /// `target` carries the stratum decoration for upstream-stratum runs and
    /// the probability decoration when configured.
    pub fn new(node: NodeId, cfg: ClientConfig, clock: ClockModel, mut rng: RngStream) -> Self {
        let run_hash = if cfg.use_random_hash {
            rng.next_bytes8().to_vec()
        } else {
            vec![0u8]
        };
        let target = Decorations {
            stratum: None,
            probability_ppm: cfg.probability_ppm,
        };
        ClientState {
            node,
            cfg,
            clock,
            target,
            run_hash,
            discovery_name: None,
            discovery_records: Vec::new(),
            labels: Vec::new(),
            pending: HashMap::new(),
            received: Vec::new(),
            negative_delays: 0,
            losses: Vec::new(),
            rng,
        }
    }

    /// Aim this run at an upstream stratum tier.
    pub fn set_stratum_target(&mut self, stratum: u32) {
        self.target.stratum = Some(stratum);
    }

    pub fn run_hash(&self) -> &[u8] {
        &self.run_hash
    }

    fn total_sends(&self) -> u64 {
        self.cfg.servers_per_run * self.cfg.samples_per_server
    }

    fn schedule_from(&self, start: u64) -> SendPlan {
        let total = self.total_sends();
        let sends: Vec<(u64, u64)> = (0..total)
            .map(|i| (start + i * self.cfg.inter_sample_gap_us, i))
            .collect();
        let last = sends.last().map(|(t, _)| *t).unwrap_or(start);
        SendPlan {
            sends,
            complete_at: last + self.cfg.lifetime_us + 1,
        }
    }

    /// Starts the run. With path labels enabled the returned Interest is the
    /// discovery request and the send plan is deferred to the discovery
    /// deadline; otherwise the plan covers the whole run immediately.
    pub fn on_start(&mut self, now: u64) -> (Option<Interest>, Option<SendPlan>) {
        if self.cfg.use_path_labels {
            let hash = self.rng.next_bytes8();
            let name = build_ndntp_name(&hash, 0, 0, self.target).expect("valid name");
            self.discovery_name = Some(name.clone());
            let mut interest = Interest::new(name, self.rng.next_nonce());
            interest.must_be_fresh = self.cfg.must_be_fresh;
            interest.lifetime_us = self.cfg.lifetime_us;
            interest.discovery_record = Some(Vec::new());
            (Some(interest), None)
        } else {
            (None, Some(self.schedule_from(now)))
        }
    }

    /// Discovery window closed: freeze the label table and schedule sampling.
    /// One label per distinct echoed record, in arrival order; records with
    /// repeated nodes are rejected.
    pub fn on_discovery_deadline(&mut self, now: u64) -> SendPlan {
        for record in std::mem::take(&mut self.discovery_records) {
            let mut seen = Vec::new();
            let distinct = record.iter().all(|n| {
                if seen.contains(n) {
                    false
                } else {
                    seen.push(*n);
                    true
                }
            });
            if distinct && !record.is_empty() && !self.labels.contains(&record) {
                self.labels.push(record);
            }
        }
        self.schedule_from(now)
    }

    /// Builds and records the i-th request of the run.
    pub fn on_send(&mut self, index: u64, now: u64) -> Interest {
        let session = index % self.cfg.servers_per_run;
        let sample = index / self.cfg.servers_per_run;
        let name =
            build_ndntp_name(&self.run_hash, session, sample, self.target).expect("valid name");
        let mut interest = Interest::new(name.clone(), self.rng.next_nonce());
        interest.must_be_fresh = self.cfg.must_be_fresh;
        interest.hop_limit = self.cfg.hop_limit;
        interest.lifetime_us = self.cfg.lifetime_us;
        if !self.labels.is_empty() {
            let label = &self.labels[(session as usize) % self.labels.len()];
            interest.path_label = Some(label.clone());
        }
        self.pending.insert(
            name,
            PendingRequest {
                session,
                sample,
                t1_us: self.clock.local_time(now),
                responses: 0,
            },
        );
        interest
    }

    /// Handles a response. Every matching Data is accepted for as long as
    /// the request is pending, so multi-response runs collect all arrivals.
    pub fn on_data(&mut self, data: &Data, now: u64) -> Vec<SampleOutcome> {
        if self.discovery_name.as_ref() == Some(&data.name) {
            if let Some(record) = &data.path_record {
                self.discovery_records.push(record.clone());
            }
            return vec![SampleOutcome::DiscoveryRecord];
        }
        let Some(pending) = self.pending.get_mut(&data.name) else {
            return Vec::new();
        };
        pending.responses += 1;
        let (session, sample, t1) = (pending.session, pending.sample, pending.t1_us);
        let t4 = self.clock.local_time(now);

        let singles: Vec<(NdntpPayload, NodeId, SignedEnvelope, Vec<u8>)> = match &data.payload {
            DataPayload::Single(p) => vec![(
                p.clone(),
                data.producer,
                data.signature,
                data_signing_bytes(&data.name, &data.payload),
            )],
            DataPayload::Aggregate { parts, .. } => parts
                .iter()
                .map(|part| {
                    (
                        part.payload.clone(),
                        part.producer,
                        part.signature,
                        payload_signing_bytes(&data.name, &part.payload),
                    )
                })
                .collect(),
        };
        let parts = singles.len() as u32;

        let mut outcomes = Vec::new();
        for (payload, producer, envelope, signed_bytes) in singles {
            match Sample::from_exchange(t1, t4, payload, session, sample) {
                Ok(mut s) => {
                    s.server = producer;
                    outcomes.push(SampleOutcome::Accepted {
                        session,
                        sample,
                        server: s.server,
                        rtt_us: t4 - t1,
                        offset_us: s.offset_us,
                        parts,
                    });
                    self.received.push(ReceivedSample {
                        sample: s,
                        envelope,
                        signed_bytes,
                    });
                }
                Err(_) => {
                    self.negative_delays += 1;
                    outcomes.push(SampleOutcome::NegativeDelay {
                        session,
                        sample,
                        server: producer,
                    });
                }
            }
        }
        outcomes
    }

    /// Request lifetime passed; unanswered requests become losses and are
    /// not retried. Returns the (session, sample) of a lost request.
    pub fn on_request_timeout(&mut self, name: &Name) -> Option<(u64, u64)> {
        let pending = self.pending.remove(name)?;
        if pending.responses == 0 {
            self.losses.push((pending.session, pending.sample));
            return Some((pending.session, pending.sample));
        }
        None
    }

    pub fn combine(
        &self,
        keys: &KeyTable,
        trust_anchors: &BTreeSet<NodeId>,
    ) -> Result<SyncResult, NoUsableSamples> {
        select_and_combine(&self.received, &self.cfg, keys, trust_anchors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::Scope;
    use proptest::prelude::*;

    fn keys() -> KeyTable {
        let mut t = KeyTable::new();
        for id in 0..8u32 {
            t.register(NodeId(id), id as u64, 77 + id as u64);
        }
        t
    }

    fn anchors(ids: &[u32]) -> BTreeSet<NodeId> {
        ids.iter().map(|i| NodeId(*i)).collect()
    }

    /// A valid signed sample with a given best offset and (even) delay.
    fn received(server: u32, offset: i64, delay: i64, keys: &KeyTable) -> ReceivedSample {
        assert_eq!(delay % 2, 0, "exact offsets need symmetric halves");
        let name = build_ndntp_name(&[server as u8], 0, 0, Decorations::default()).unwrap();
        let t1 = 1_000;
        let fwd = delay / 2;
        let t2 = t1 + fwd + offset;
        let t3 = t2;
        let t4 = t1 + delay;
        let payload = NdntpPayload {
            t2_receive_us: t2,
            t3_transmit_us: t3,
            stratum: 1,
            server: NodeId(server),
            echo_of_name: name.clone(),
        };
        let sample = Sample::from_exchange(t1, t4, payload.clone(), 0, 0).unwrap();
        assert_eq!(sample.offset_us, offset);
        assert_eq!(sample.delay_us, delay);
        let bytes = payload_signing_bytes(&name, &payload);
        let envelope = keys.sign(NodeId(server), &bytes);
        ReceivedSample {
            sample,
            envelope,
            signed_bytes: bytes,
        }
    }

    #[test]
    fn outlier_server_discarded_and_median_combined() {
        let keys = keys();
        let samples = vec![
            received(1, 45_000, 100, &keys),
            received(2, 45_200, 100, &keys),
            received(3, 44_900, 100, &keys),
            received(4, 500_000, 100, &keys),
        ];
        let cfg = ClientConfig {
            cluster_tolerance_us: 100_000,
            ..Default::default()
        };
        let result = select_and_combine(&samples, &cfg, &keys, &anchors(&[1, 2, 3, 4])).unwrap();
        assert_eq!(result.combined_offset_us, 45_000);
        assert_eq!(
            result.discarded,
            vec![(NodeId(4), DiscardReason::OffsetOutlier)]
        );
        assert_eq!(result.surviving_servers.len(), 3);
    }

    #[test]
    fn single_server_is_exact() {
        let keys = keys();
        let samples = vec![received(1, 45_000, 10, &keys)];
        let cfg = ClientConfig::default();
        let result = select_and_combine(&samples, &cfg, &keys, &anchors(&[1])).unwrap();
        assert_eq!(result.combined_offset_us, 45_000);
    }

    #[test]
    fn all_above_threshold_is_no_usable_samples() {
        let keys = keys();
        let samples = vec![
            received(1, 0, 300_000, &keys),
            received(2, 0, 400_000, &keys),
        ];
        let cfg = ClientConfig {
            rtt_threshold_us: 250_000,
            ..Default::default()
        };
        assert_eq!(
            select_and_combine(&samples, &cfg, &keys, &anchors(&[1, 2])),
            Err(NoUsableSamples)
        );
    }

    #[test]
    fn per_server_best_is_minimum_delay() {
        let keys = keys();
        let samples = vec![
            received(1, 10, 400, &keys),
            received(1, 45_000, 100, &keys),
            received(1, 20, 402, &keys),
        ];
        let cfg = ClientConfig::default();
        let result = select_and_combine(&samples, &cfg, &keys, &anchors(&[1])).unwrap();
        assert_eq!(result.combined_offset_us, 45_000);
        assert_eq!(result.per_server_best.len(), 1);
        assert_eq!(result.per_server_best[0].delay_us, 100);
    }

    #[test]
    fn tampered_sample_never_influences_result() {
        let keys = keys();
        let good = received(1, 100, 10, &keys);
        let mut evil = received(2, 999_999_000, 6, &keys);
        evil.signed_bytes[3] ^= 1;
        let cfg = ClientConfig {
            cluster_tolerance_us: u64::MAX,
            ..Default::default()
        };
        let result = select_and_combine(&[good, evil], &cfg, &keys, &anchors(&[1, 2])).unwrap();
        assert_eq!(result.combined_offset_us, 100);
        assert!(result
            .discarded
            .contains(&(NodeId(2), DiscardReason::SignatureFail)));
    }

    #[test]
    fn unanchored_signer_is_discarded() {
        let keys = keys();
        let samples = vec![received(1, 100, 10, &keys), received(2, 200, 10, &keys)];
        let cfg = ClientConfig::default();
        let result = select_and_combine(&samples, &cfg, &keys, &anchors(&[1])).unwrap();
        assert_eq!(result.combined_offset_us, 100);
        assert!(result
            .discarded
            .contains(&(NodeId(2), DiscardReason::SignatureFail)));
    }

    #[test]
    fn client_run_names_cover_sessions_and_samples() {
        let cfg = ClientConfig {
            servers_per_run: 4,
            samples_per_server: 4,
            ..Default::default()
        };
        let rng = RngStream::new(42, Scope::Node(0), "client");
        let mut client = ClientState::new(NodeId(0), cfg, ClockModel::default(), rng);
        let (discovery, plan) = client.on_start(0);
        assert!(discovery.is_none());
        let plan = plan.unwrap();
        assert_eq!(plan.sends.len(), 16);
        let mut seen = BTreeSet::new();
        for (at, idx) in &plan.sends {
            let interest = client.on_send(*idx, *at);
            let parsed = crate::name::parse_ndntp_name(&interest.name).unwrap();
            assert_eq!(parsed.hash, client.run_hash());
            assert!(parsed.session < 4 && parsed.sample < 4);
            seen.insert((parsed.session, parsed.sample));
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn fixed_hash_clients_build_identical_names() {
        let cfg = ClientConfig {
            servers_per_run: 1,
            samples_per_server: 2,
            use_random_hash: false,
            ..Default::default()
        };
        let mut c1 = ClientState::new(
            NodeId(0),
            cfg.clone(),
            ClockModel::default(),
            RngStream::new(42, Scope::Node(0), "client"),
        );
        let mut c2 = ClientState::new(
            NodeId(1),
            cfg,
            ClockModel::default(),
            RngStream::new(42, Scope::Node(1), "client"),
        );
        assert_eq!(c1.on_send(0, 0).name, c2.on_send(0, 5).name);
    }

    #[test]
    fn timeout_without_response_is_a_loss() {
        let cfg = ClientConfig {
            servers_per_run: 1,
            samples_per_server: 1,
            ..Default::default()
        };
        let rng = RngStream::new(1, Scope::Node(0), "client");
        let mut client = ClientState::new(NodeId(0), cfg, ClockModel::default(), rng);
        let interest = client.on_send(0, 0);
        client.on_request_timeout(&interest.name);
        assert_eq!(client.losses, vec![(0, 0)]);
    }

    proptest! {
        #[test]
        fn permutation_invariant(perm in proptest::sample::subsequence((0..6usize).collect::<Vec<_>>(), 6)) {
            let keys = keys();
            let base: Vec<ReceivedSample> = (0..6u32)
                .map(|i| received(i + 1, 1_000 * i as i64, 10 + 2 * i as i64, &keys))
                .collect();
            let mut shuffled = base.clone();
            // rotate by the subsequence length for a cheap permutation
            shuffled.rotate_left(perm.len() % 6);
            let cfg = ClientConfig { cluster_tolerance_us: u64::MAX, ..Default::default() };
            let a = select_and_combine(&base, &cfg, &keys, &anchors(&[1,2,3,4,5,6])).unwrap();
            let b = select_and_combine(&shuffled, &cfg, &keys, &anchors(&[1,2,3,4,5,6])).unwrap();
            prop_assert_eq!(a.combined_offset_us, b.combined_offset_us);
        }

        #[test]
        fn shifting_server_clocks_shifts_combined_exactly(c in -1_000_000i64..1_000_000) {
            let keys = keys();
            let mk = |shift: i64| -> Vec<ReceivedSample> {
                (0..4u32).map(|i| {
                    let mut r = received(i + 1, 500 * i as i64, 10, &keys);
                    // shift both server timestamps by c and re-derive
                    let mut p = r.sample.payload.clone();
                    p.t2_receive_us += shift;
                    p.t3_transmit_us += shift;
                    let bytes = payload_signing_bytes(&r.sample.payload.echo_of_name, &p);
                    let env = keys.sign(NodeId(i + 1), &bytes);
                    let s = Sample::from_exchange(r.sample.t1_send_us, r.sample.t4_recv_us, p, 0, 0).unwrap();
                    r.sample = s;
                    r.envelope = env;
                    r.signed_bytes = bytes;
                    r
                }).collect()
            };
            let cfg = ClientConfig { cluster_tolerance_us: u64::MAX, ..Default::default() };
            let base = select_and_combine(&mk(0), &cfg, &keys, &anchors(&[1,2,3,4])).unwrap();
            let shifted = select_and_combine(&mk(c), &cfg, &keys, &anchors(&[1,2,3,4])).unwrap();
            prop_assert_eq!(shifted.combined_offset_us, base.combined_offset_us + c);
        }
    }
}
