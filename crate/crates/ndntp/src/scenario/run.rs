//! The run driver: builds a simulation from a scenario, executes it to the
//! configured horizon, and collects metrics, a summary, and the audit trail.

use serde::Serialize;

use crate::auth::KeyTable;
use crate::endpoint::{ClientState, SampleOutcome, ServerApp, SyncResult};
use crate::fib::Fib;
use crate::forwarder::{
    dispatch_strategy, label_successor_face, Action, AuditNote, DropReason, Forwarder,
};
use crate::ids::{FaceId, NodeId};
use crate::name::Name;
use crate::packet::{Data, Interest, Packet};
use crate::pit::PitMode;
use crate::scenario::config::{RoleConfig, ScenarioConfig, ScenarioError, StratumSyncConfig};
use crate::scenario::fib_build::{compute_fib_with, FaceTarget, Topology};
use crate::scenario::metrics::MetricsRecord;
use crate::sim::audit::{AuditRecord, EventTag, Trail};
use crate::sim::engine::{Event, EventKind, EventQueue, TimerKind};
use crate::sim::link::{Link, Transmit};
use crate::sim::rng::{RngStream, Scope};
use crate::strategy::{SessionPinState, StrategyKind};

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pit_mode: Option<PitMode>,
    pub strategy: Option<StrategyKind>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClientSummary {
    pub client: String,
    pub samples_received: u64,
    pub losses: u64,
    pub discarded: u64,
    pub combined_offset_us: Option<i64>,
    pub true_offset_us: i64,
    pub abs_error_us: Option<i64>,
    /// Mean per-sample absolute error, three decimals.
    pub mean_sample_error_us: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PassiveSyncSummary {
    pub node: String,
    pub last_sync_us: u64,
    pub bias_us: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumStepSummary {
    pub server: String,
    pub applied_offset_us: i64,
    pub at_us: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub pit_mode: String,
    pub strategy: String,
    pub duration_us: u64,
    pub events_executed: u64,
    pub flow_balance_violations: u64,
    pub cache_hits: u64,
    pub pit_aggregations: u64,
    pub clients: Vec<ClientSummary>,
    pub passive_sync: Vec<PassiveSyncSummary>,
    pub stratum_steps: Vec<StratumStepSummary>,
    pub trail_hash: String,
}

/// Per-client detail kept out of the flat metrics rows.
#[derive(Debug, Clone)]
pub struct ClientReport {
    pub node: String,
    pub sync: Option<SyncResult>,
    pub no_usable_samples: bool,
    pub labels: Vec<Vec<String>>,
    pub samples_received: u64,
    pub losses: u64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub trail: Trail,
    pub clients: Vec<ClientReport>,
}

struct ClientNode {
    app: ClientState,
    fib: Fib,
    strategies: Vec<(Name, StrategyKind)>,
    pins: SessionPinState,
    strategy_rng: RngStream,
    fanout_rng: RngStream,
}

struct SyncClient {
    app: ClientState,
    cfg: StratumSyncConfig,
    run_counter: u64,
}

struct PipelineNode {
    fwd: Forwarder,
    server: Option<ServerApp>,
    sync: Option<SyncClient>,
}

enum NodeRuntime {
    Client(Box<ClientNode>),
    Pipeline(Box<PipelineNode>),
}

struct Runtime<'a> {
    cfg: &'a ScenarioConfig,
    seed: u64,
    queue: EventQueue,
    topo: Topology,
    links: Vec<Link>,
    nodes: Vec<NodeRuntime>,
    keys: KeyTable,
    trail: Trail,
    metrics: Vec<MetricsRecord>,
    run_id: String,
    pit_label: String,
    strategy_label: String,
    passive_sync: Vec<Option<(u64, i64)>>,
    stratum_steps: Vec<StratumStepSummary>,
    reports: Vec<Option<ClientReport>>,
}

fn strategy_label(cfg: &ScenarioConfig, overrides: &Overrides) -> String {
    if let Some(kind) = overrides.strategy {
        return kind.label().to_string();
    }
    if let Some(label) = &cfg.strategy_label {
        return label.clone();
    }
    let mut kinds: Vec<&'static str> = cfg.strategies.iter().map(|(_, _, k)| k.label()).collect();
    kinds.sort();
    kinds.dedup();
    match kinds.len() {
        0 => "best-route".to_string(),
        1 => kinds[0].to_string(),
        _ => "mixed".to_string(),
    }
}

pub fn run_scenario(
    cfg: &ScenarioConfig,
    overrides: &Overrides,
) -> Result<RunOutput, ScenarioError> {
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let topo = Topology::build(cfg);
    let fibs = compute_fib_with(cfg, &topo);

    let mut keys = KeyTable::new();
    for i in 0..cfg.nodes.len() {
        let mut kr = RngStream::new(seed, Scope::Node(i as u32), "key");
        keys.register(NodeId(i as u32), kr.next_u64(), kr.next_u64());
    }

    let links: Vec<Link> = cfg
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let spec = crate::sim::link::LinkSpec {
                a: crate::sim::link::LinkEnd {
                    node: l.a,
                    face: topo.face_on_link(l.a, i).expect("face exists"),
                },
                b: crate::sim::link::LinkEnd {
                    node: l.b,
                    face: topo.face_on_link(l.b, i).expect("face exists"),
                },
                delay_us: l.delay_us,
                jitter_us: l.jitter_us,
                loss_ppm: l.loss_ppm,
                extra_ab_us: l.extra_ab_us,
                extra_ba_us: l.extra_ba_us,
            };
            Link::new(
                spec,
                RngStream::new(seed, Scope::Link(i as u32), "jitter"),
                RngStream::new(seed, Scope::Link(i as u32), "loss"),
            )
        })
        .collect();

    let strategy_for_node = |node: usize| -> Vec<(Name, StrategyKind)> {
        if let Some(kind) = overrides.strategy {
            return vec![(Name::ndntp_prefix(), kind)];
        }
        cfg.strategies
            .iter()
            .filter(|(n, _, _)| n.0 as usize == node)
            .map(|(_, prefix, kind)| (prefix.clone(), *kind))
            .collect()
    };

    let mut nodes = Vec::with_capacity(cfg.nodes.len());
    for (i, node_cfg) in cfg.nodes.iter().enumerate() {
        let id = NodeId(i as u32);
        match &node_cfg.role {
            RoleConfig::Client(client_cfg) => {
                nodes.push(NodeRuntime::Client(Box::new(ClientNode {
                    app: ClientState::new(
                        id,
                        client_cfg.clone(),
                        node_cfg.clock,
                        RngStream::new(seed, Scope::Node(id.0), "client"),
                    ),
                    fib: fibs[i].clone(),
                    strategies: strategy_for_node(i),
                    pins: SessionPinState::new(),
                    strategy_rng: RngStream::new(seed, Scope::Node(id.0), "strategy"),
                    fanout_rng: RngStream::new(seed, Scope::Node(id.0), "fanout-nonce"),
                })));
            }
            role => {
                let mut fwd_cfg = node_cfg.forwarder.clone();
                if let Some(mode) = overrides.pit_mode {
                    fwd_cfg.pit_mode = mode;
                }
                let fwd = Forwarder::new(
                    id,
                    fwd_cfg,
                    fibs[i].clone(),
                    strategy_for_node(i),
                    topo.neighbors[i].clone(),
                    node_cfg.clock,
                    RngStream::new(seed, Scope::Node(id.0), "strategy"),
                    RngStream::new(seed, Scope::Node(id.0), "fanout-nonce"),
                );
                let (server, sync) = match role {
                    RoleConfig::Server {
                        server,
                        stratum_sync,
                    } => {
                        let app = ServerApp::new(id, server.clone(), node_cfg.clock);
                        let sync = stratum_sync.as_ref().map(|s| {
                            let mut client = ClientState::new(
                                id,
                                s.client.clone(),
                                node_cfg.clock,
                                RngStream::new(seed, Scope::Node(id.0), "sync-client"),
                            );
                            client.set_stratum_target(server.stratum - 1);
                            SyncClient {
                                app: client,
                                cfg: s.clone(),
                                run_counter: 0,
                            }
                        });
                        (Some(app), sync)
                    }
                    _ => (None, None),
                };
                nodes.push(NodeRuntime::Pipeline(Box::new(PipelineNode {
                    fwd,
                    server,
                    sync,
                })));
            }
        }
    }

    let pit_label = overrides
        .pit_mode
        .unwrap_or(cfg.pit_mode)
        .label()
        .to_string();
    let mut rt = Runtime {
        cfg,
        seed,
        queue: EventQueue::new(),
        topo,
        links,
        nodes,
        keys,
        trail: Trail::default(),
        metrics: Vec::new(),
        run_id: format!("{}:{}", cfg.name, seed),
        pit_label,
        strategy_label: strategy_label(cfg, overrides),
        passive_sync: vec![None; cfg.nodes.len()],
        stratum_steps: Vec::new(),
        reports: vec![None; cfg.nodes.len()],
    };
    rt.schedule_app_starts();
    rt.run()?;
    Ok(rt.finish())
}

impl<'a> Runtime<'a> {
    fn node_name(&self, id: NodeId) -> String {
        self.cfg.node_name(id).to_string()
    }

    /// Offset a perfect client at `node` would compute: reference time minus
    /// the node's local clock.
    fn true_offset(&self, node: NodeId, t: u64) -> i64 {
        t as i64 - self.cfg.nodes[node.0 as usize].clock.local_time(t)
    }

    fn schedule_app_starts(&mut self) {
        for (i, node_cfg) in self.cfg.nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            match &node_cfg.role {
                RoleConfig::Client(c) => {
                    self.queue
                        .schedule(Event {
                            fire_at: c.start_at_us,
                            node: id,
                            kind: EventKind::AppStart,
                        })
                        .expect("start in the future");
                }
                RoleConfig::Server {
                    stratum_sync: Some(s),
                    ..
                } => {
                    self.queue
                        .schedule(Event {
                            fire_at: s.start_at_us,
                            node: id,
                            kind: EventKind::Timer {
                                timer: TimerKind::StratumSync,
                            },
                        })
                        .expect("start in the future");
                }
                _ => {}
            }
        }
    }

    fn run(&mut self) -> Result<(), ScenarioError> {
        let horizon = self.cfg.duration_us;
        while let Some(event) = self.queue.pop_until(horizon) {
            let now = event.fire_at;
            match event.kind {
                EventKind::Deliver { face, packet } => {
                    self.on_deliver(event.node, face, packet, now)
                }
                EventKind::AppDeliver { packet } => self.on_app_deliver(event.node, packet, now),
                EventKind::Timer { timer } => self.on_timer(event.node, timer, now),
                EventKind::AppStart => self.on_app_start(event.node, now),
            }
        }
        Ok(())
    }

    // ---- trail helpers ----

    fn record_packet(&mut self, t: u64, node: NodeId, ev: EventTag, face: FaceId, packet: &Packet) {
        let mut r = AuditRecord::new(t, self.node_name(node), ev);
        r.face = Some(face.0);
        r.name = Some(packet.name().to_string());
        match packet {
            Packet::Interest(i) => {
                r.pkt = Some('I');
                r.nonce = Some(i.nonce);
            }
            Packet::Data(d) => {
                r.pkt = Some('D');
                r.producer = Some(self.node_name(d.producer));
                r.parts = Some(d.payload.response_count() as u32);
            }
        }
        self.trail.push(r);
    }

    fn record_drop(&mut self, t: u64, node: NodeId, packet: &Packet, reason: &str) {
        let mut r = AuditRecord::new(t, self.node_name(node), EventTag::Drop);
        r.name = Some(packet.name().to_string());
        r.pkt = Some(match packet {
            Packet::Interest(_) => 'I',
            Packet::Data(_) => 'D',
        });
        r.reason = Some(reason.to_string());
        self.trail.push(r);
    }

    // ---- packet movement ----

    /// Sends a packet out of `node` via `face` (onto a link or to the local
    /// app), recording the send and scheduling the delivery.
    fn send_on_face(&mut self, node: NodeId, face: FaceId, packet: Packet, now: u64) {
        self.record_packet(now, node, EventTag::Send, face, &packet);
        match self.topo.faces[node.0 as usize][face.0 as usize] {
            FaceTarget::App => {
                self.queue
                    .schedule(Event {
                        fire_at: now,
                        node,
                        kind: EventKind::AppDeliver { packet },
                    })
                    .expect("now is not in the past");
            }
            FaceTarget::Link { link } => {
                let l = &mut self.links[link];
                let from_a = l.side_of(node, face).expect("face attached to link");
                match l.transmit(from_a, now) {
                    Transmit::Deliver { to, at } => {
                        self.queue
                            .schedule(Event {
                                fire_at: at,
                                node: to.node,
                                kind: EventKind::Deliver {
                                    face: to.face,
                                    packet,
                                },
                            })
                            .expect("delivery after now");
                    }
                    Transmit::Lost => {
                        let mut r = AuditRecord::new(now, self.node_name(node), EventTag::Loss);
                        r.face = Some(face.0);
                        r.name = Some(packet.name().to_string());
                        self.trail.push(r);
                    }
                }
            }
        }
    }

    fn on_deliver(&mut self, node: NodeId, face: FaceId, packet: Packet, now: u64) {
        self.record_packet(now, node, EventTag::Recv, face, &packet);
        match &mut self.nodes[node.0 as usize] {
            NodeRuntime::Pipeline(p) => {
                let actions = match packet {
                    Packet::Interest(i) => p.fwd.process_interest(face, i, now, &self.keys),
                    Packet::Data(d) => p.fwd.process_data(face, d, now, &self.keys),
                };
                self.apply_actions(node, actions, now);
            }
            NodeRuntime::Client(c) => match packet {
                Packet::Data(d) => {
                    let outcomes = c.app.on_data(&d, now);
                    self.consume_outcomes(node, &d, outcomes, now);
                }
                Packet::Interest(_) => {
                    self.record_drop(now, node, &packet, DropReason::NoRoute.label());
                }
            },
        }
    }

    fn on_app_deliver(&mut self, node: NodeId, packet: Packet, now: u64) {
        match &mut self.nodes[node.0 as usize] {
            NodeRuntime::Pipeline(p) => match packet {
                Packet::Interest(i) => {
                    if let Some(server) = &p.server {
                        let (data, delay) = server.on_interest(&i, now, &self.keys);
                        self.queue
                            .schedule(Event {
                                fire_at: now + delay,
                                node,
                                kind: EventKind::Deliver {
                                    face: FaceId::APP,
                                    packet: Packet::Data(data),
                                },
                            })
                            .expect("emission after now");
                    } else {
                        self.record_drop(
                            now,
                            node,
                            &Packet::Interest(i),
                            DropReason::NoRoute.label(),
                        );
                    }
                }
                Packet::Data(d) => {
                    if let Some(sync) = &mut p.sync {
                        let outcomes = sync.app.on_data(&d, now);
                        self.consume_outcomes(node, &d, outcomes, now);
                    } else {
                        self.record_drop(
                            now,
                            node,
                            &Packet::Data(d),
                            DropReason::Unsolicited.label(),
                        );
                    }
                }
            },
            NodeRuntime::Client(_) => unreachable!("client nodes have no pipeline"),
        }
    }

    fn apply_actions(&mut self, node: NodeId, actions: Vec<Action>, now: u64) {
        for action in actions {
            match action {
                Action::SendInterest { face, interest } => {
                    self.send_on_face(node, face, Packet::Interest(interest), now);
                }
                Action::SendData {
                    face,
                    data,
                    origin: _,
                } => {
                    self.send_on_face(node, face, Packet::Data(data), now);
                }
                Action::DropInterest { interest, reason } => {
                    self.record_drop(now, node, &Packet::Interest(interest), reason.label());
                }
                Action::DropData { data, reason } => {
                    self.record_drop(now, node, &Packet::Data(data), reason.label());
                }
                Action::SchedulePitExpiry { name, at } => {
                    self.queue
                        .schedule(Event {
                            fire_at: at,
                            node,
                            kind: EventKind::Timer {
                                timer: TimerKind::PitExpiry { name },
                            },
                        })
                        .expect("expiry after now");
                }
                Action::ScheduleAggDeadline { name, at } => {
                    self.queue
                        .schedule(Event {
                            fire_at: at,
                            node,
                            kind: EventKind::Timer {
                                timer: TimerKind::AggDeadline { name },
                            },
                        })
                        .expect("deadline after now");
                }
                Action::Note(note) => self.record_note(node, note, now),
            }
        }
    }

    fn record_note(&mut self, node: NodeId, note: AuditNote, now: u64) {
        match note {
            AuditNote::CsHit {
                name,
                age_us,
                freshness_us,
                must_be_fresh,
            } => {
                let mut r = AuditRecord::new(now, self.node_name(node), EventTag::CsHit);
                r.name = Some(name.to_string());
                r.age_us = Some(age_us);
                r.freshness_us = Some(freshness_us);
                r.mbf = Some(must_be_fresh);
                self.trail.push(r);
            }
            AuditNote::PitAggregated { name, face } => {
                let mut r = AuditRecord::new(now, self.node_name(node), EventTag::PitAgg);
                r.name = Some(name.to_string());
                r.face = Some(face.0);
                self.trail.push(r);
            }
            AuditNote::Pinned {
                name,
                session,
                face,
            } => {
                let mut r = AuditRecord::new(now, self.node_name(node), EventTag::Pin);
                r.name = Some(name.to_string());
                r.session = Some(session);
                r.face = Some(face.0);
                self.trail.push(r);
            }
            AuditNote::PassiveSync { estimate_us } => {
                let bias = estimate_us - now as i64;
                self.passive_sync[node.0 as usize] = Some((now, bias));
                let mut r = AuditRecord::new(now, self.node_name(node), EventTag::PassiveSync);
                r.value_us = Some(bias);
                self.trail.push(r);
            }
        }
    }

    // ---- client plumbing ----

    fn client_app_of(nodes: &mut [NodeRuntime], node: NodeId) -> &mut ClientState {
        match &mut nodes[node.0 as usize] {
            NodeRuntime::Client(c) => &mut c.app,
            NodeRuntime::Pipeline(p) => &mut p.sync.as_mut().expect("sync client present").app,
        }
    }

    fn client_app(&mut self, node: NodeId) -> &mut ClientState {
        Self::client_app_of(&mut self.nodes, node)
    }

    fn schedule_plan(&mut self, node: NodeId, plan: crate::endpoint::SendPlan) {
        for (at, index) in plan.sends {
            self.queue
                .schedule(Event {
                    fire_at: at,
                    node,
                    kind: EventKind::Timer {
                        timer: TimerKind::ClientSend { index },
                    },
                })
                .expect("send after now");
        }
        self.queue
            .schedule(Event {
                fire_at: plan.complete_at,
                node,
                kind: EventKind::Timer {
                    timer: TimerKind::RunComplete,
                },
            })
            .expect("completion after now");
    }

    fn on_app_start(&mut self, node: NodeId, now: u64) {
        let (discovery, plan) = self.client_app(node).on_start(now);
        if let Some(interest) = discovery {
            let deadline = now + interest.lifetime_us;
            self.emit_client_interest(node, interest, now);
            self.queue
                .schedule(Event {
                    fire_at: deadline,
                    node,
                    kind: EventKind::Timer {
                        timer: TimerKind::DiscoveryDeadline,
                    },
                })
                .expect("deadline after now");
        }
        if let Some(plan) = plan {
            self.schedule_plan(node, plan);
        }
    }

    /// Sends a client-built Interest into the network: pure clients choose
    /// faces themselves; pipeline-hosted sync clients inject via the app face.
    fn emit_client_interest(&mut self, node: NodeId, interest: Interest, now: u64) {
        let mut r = AuditRecord::new(now, self.node_name(node), EventTag::AppSend);
        r.name = Some(interest.name.to_string());
        r.nonce = Some(interest.nonce);
        self.trail.push(r);

        let timeout_at = now + interest.lifetime_us;
        let name = interest.name.clone();

        enum Route {
            Inject,
            Faces(Vec<FaceId>),
            Refuse(DropReason),
        }
        let route = match &mut self.nodes[node.0 as usize] {
            NodeRuntime::Pipeline(_) => Route::Inject,
            NodeRuntime::Client(c) => {
                let label_face = match interest.path_label.as_deref() {
                    Some(label) => {
                        label_successor_face(node, label, &self.topo.neighbors[node.0 as usize])
                            .map(|f| f.map(|face| vec![face]))
                    }
                    None => Ok(None),
                };
                let chosen = match label_face {
                    Err(reason) => Err(reason),
                    Ok(Some(faces)) => Ok(faces),
                    Ok(None) => match c.fib.lookup(&interest.name).cloned() {
                        None => Err(DropReason::NoRoute),
                        Some(entry) => {
                            let kind = c
                                .strategies
                                .iter()
                                .find(|(p, _)| p.is_prefix_of(&interest.name))
                                .map(|(_, k)| *k)
                                .unwrap_or_default();
                            dispatch_strategy(
                                kind,
                                &interest,
                                &entry,
                                None,
                                &mut c.pins,
                                &mut c.strategy_rng,
                            )
                            .map(|(faces, _)| faces)
                            .map_err(|_| DropReason::NoRoute)
                        }
                    },
                };
                match chosen {
                    Ok(faces) => Route::Faces(faces),
                    Err(reason) => Route::Refuse(reason),
                }
            }
        };
        match route {
            Route::Inject => {
                self.queue
                    .schedule(Event {
                        fire_at: now,
                        node,
                        kind: EventKind::Deliver {
                            face: FaceId::APP,
                            packet: Packet::Interest(interest),
                        },
                    })
                    .expect("now is not past");
            }
            Route::Faces(faces) => {
                for (idx, face) in faces.into_iter().enumerate() {
                    let mut copy = interest.clone();
                    if idx > 0 && copy.discovery_record.is_some() {
                        if let NodeRuntime::Client(c) = &mut self.nodes[node.0 as usize] {
                            copy.nonce = c.fanout_rng.next_nonce();
                        }
                    }
                    self.send_on_face(node, face, Packet::Interest(copy), now);
                }
            }
            Route::Refuse(reason) => {
                self.record_drop(now, node, &Packet::Interest(interest), reason.label());
            }
        }
        self.queue
            .schedule(Event {
                fire_at: timeout_at,
                node,
                kind: EventKind::Timer {
                    timer: TimerKind::RequestTimeout { name },
                },
            })
            .expect("timeout after now");
    }

    fn consume_outcomes(
        &mut self,
        node: NodeId,
        data: &Data,
        outcomes: Vec<SampleOutcome>,
        now: u64,
    ) {
        if outcomes.is_empty() {
            self.record_drop(
                now,
                node,
                &Packet::Data(data.clone()),
                DropReason::Unsolicited.label(),
            );
            return;
        }
        let mut r = AuditRecord::new(now, self.node_name(node), EventTag::AppRecv);
        r.name = Some(data.name.to_string());
        r.producer = Some(self.node_name(data.producer));
        r.parts = Some(data.payload.response_count() as u32);
        self.trail.push(r);

        let mut reached: Vec<String> = Vec::new();
        let mut first: Option<(u64, u64, i64, i64)> = None;
        let mut negative: Option<(u64, u64, String)> = None;
        for o in &outcomes {
            match o {
                SampleOutcome::Accepted {
                    session,
                    sample,
                    server,
                    rtt_us,
                    offset_us,
                    ..
                } => {
                    reached.push(self.node_name(*server));
                    if first.is_none() {
                        first = Some((*session, *sample, *rtt_us, *offset_us));
                    }
                }
                SampleOutcome::NegativeDelay {
                    session,
                    sample,
                    server,
                } => {
                    negative = Some((*session, *sample, self.node_name(*server)));
                }
                SampleOutcome::DiscoveryRecord => {}
            }
        }
        if let Some((session, sample, rtt, offset)) = first {
            let true_offset = self.true_offset(node, now);
            self.metrics.push(MetricsRecord {
                run_id: self.run_id.clone(),
                client: self.node_name(node),
                session: Some(session),
                sample: Some(sample),
                server_reached: reached.join("+"),
                rtt_us: Some(rtt),
                est_offset_us: Some(offset),
                true_offset_us: Some(true_offset),
                abs_error_us: Some((offset - true_offset).abs()),
                discarded_reason: String::new(),
                pit_mode: self.pit_label.clone(),
                strategy: self.strategy_label.clone(),
            });
        } else if let Some((session, sample, server)) = negative {
            self.metrics.push(MetricsRecord {
                run_id: self.run_id.clone(),
                client: self.node_name(node),
                session: Some(session),
                sample: Some(sample),
                server_reached: server,
                rtt_us: None,
                est_offset_us: None,
                true_offset_us: Some(self.true_offset(node, now)),
                abs_error_us: None,
                discarded_reason: "negative-delay".to_string(),
                pit_mode: self.pit_label.clone(),
                strategy: self.strategy_label.clone(),
            });
        }
    }

    fn on_timer(&mut self, node: NodeId, timer: TimerKind, now: u64) {
        match timer {
            TimerKind::ClientSend { index } => {
                let interest = self.client_app(node).on_send(index, now);
                self.emit_client_interest(node, interest, now);
            }
            TimerKind::RequestTimeout { name } => {
                if let Some((session, sample)) = self.client_app(node).on_request_timeout(&name) {
                    self.metrics.push(MetricsRecord {
                        run_id: self.run_id.clone(),
                        client: self.node_name(node),
                        session: Some(session),
                        sample: Some(sample),
                        server_reached: String::new(),
                        rtt_us: None,
                        est_offset_us: None,
                        true_offset_us: Some(self.true_offset(node, now)),
                        abs_error_us: None,
                        discarded_reason: "timeout".to_string(),
                        pit_mode: self.pit_label.clone(),
                        strategy: self.strategy_label.clone(),
                    });
                }
            }
            TimerKind::DiscoveryDeadline => {
                let plan = self.client_app(node).on_discovery_deadline(now);
                self.schedule_plan(node, plan);
            }
            TimerKind::RunComplete => self.on_run_complete(node, now),
            TimerKind::PitExpiry { name } => {
                if let NodeRuntime::Pipeline(p) = &mut self.nodes[node.0 as usize] {
                    p.fwd.on_pit_expiry(&name, now);
                }
            }
            TimerKind::AggDeadline { name } => {
                if let NodeRuntime::Pipeline(p) = &mut self.nodes[node.0 as usize] {
                    let actions = p.fwd.on_agg_deadline(&name, now, &self.keys);
                    self.apply_actions(node, actions, now);
                }
            }
            TimerKind::StratumSync => {
                let (discovery, plan) = self.client_app(node).on_start(now);
                debug_assert!(discovery.is_none(), "sync clients do not discover labels");
                if let Some(plan) = plan {
                    self.schedule_plan(node, plan);
                }
            }
        }
    }

    fn on_run_complete(&mut self, node: NodeId, now: u64) {
        let anchors = self.cfg.trust_anchors.clone();
        let (result, samples, losses, labels) = {
            let keys = &self.keys;
            let app = Self::client_app_of(&mut self.nodes, node);
            let result = app.combine(keys, &anchors);
            (
                result,
                app.received.len() as u64,
                app.losses.len() as u64,
                app.labels.clone(),
            )
        };
        let true_offset = self.true_offset(node, now);
        let (combined, discarded_reason, sync) = match &result {
            Ok(r) => (Some(r.combined_offset_us), String::new(), Some(r.clone())),
            Err(_) => (None, "no-usable-samples".to_string(), None),
        };

        let mut rec = AuditRecord::new(now, self.node_name(node), EventTag::SyncResult);
        rec.value_us = combined;
        if combined.is_none() {
            rec.reason = Some("no-usable-samples".to_string());
        }
        self.trail.push(rec);

        self.metrics.push(MetricsRecord {
            run_id: self.run_id.clone(),
            client: self.node_name(node),
            session: None,
            sample: None,
            server_reached: sync
                .as_ref()
                .map(|r| {
                    r.surviving_servers
                        .iter()
                        .map(|s| self.node_name(*s))
                        .collect::<Vec<_>>()
                        .join("+")
                })
                .unwrap_or_default(),
            rtt_us: None,
            est_offset_us: combined,
            true_offset_us: Some(true_offset),
            abs_error_us: combined.map(|c| (c - true_offset).abs()),
            discarded_reason,
            pit_mode: self.pit_label.clone(),
            strategy: self.strategy_label.clone(),
        });

        let report = ClientReport {
            node: self.node_name(node),
            no_usable_samples: sync.is_none(),
            labels: labels
                .iter()
                .map(|l| l.iter().map(|n| self.node_name(*n)).collect())
                .collect(),
            sync,
            samples_received: samples,
            losses,
        };
        self.reports[node.0 as usize] = Some(report);

        // a serving node steps its clock from the combined estimate
        if let NodeRuntime::Pipeline(p) = &mut self.nodes[node.0 as usize] {
            if let (Some(server), Some(sync_rt)) = (&mut p.server, &mut p.sync) {
                if let Some(step) = combined {
                    server.apply_stratum_step(step);
                    let mut r = AuditRecord::new(
                        now,
                        self.cfg.node_name(node).to_string(),
                        EventTag::StratumStep,
                    );
                    r.value_us = Some(step);
                    self.trail.push(r);
                    self.stratum_steps.push(StratumStepSummary {
                        server: self.cfg.node_name(node).to_string(),
                        applied_offset_us: step,
                        at_us: now,
                    });
                }
                if let Some(period) = sync_rt.cfg.period_us {
                    sync_rt.run_counter += 1;
                    let purpose = format!("sync-client-{}", sync_rt.run_counter);
                    // the next round measures with the *disciplined* clock:
                    // the accumulated correction folds into the offset, so a
                    // converged server measures (and applies) nothing
                    let mut clock = self.cfg.nodes[node.0 as usize].clock;
                    clock.offset_us += server.correction_us;
                    let mut client = ClientState::new(
                        node,
                        sync_rt.cfg.client.clone(),
                        clock,
                        RngStream::new(self.seed, Scope::Node(node.0), &purpose),
                    );
                    client.set_stratum_target(server.cfg.stratum - 1);
                    sync_rt.app = client;
                    self.queue
                        .schedule(Event {
                            fire_at: now + period,
                            node,
                            kind: EventKind::Timer {
                                timer: TimerKind::StratumSync,
                            },
                        })
                        .expect("periodic sync after now");
                }
            }
        }
    }

    fn finish(mut self) -> RunOutput {
        let mut flow_balance_violations = 0;
        let mut cache_hits = 0;
        let mut pit_aggregations = 0;
        for n in &self.nodes {
            if let NodeRuntime::Pipeline(p) = n {
                flow_balance_violations += p.fwd.counters.flow_balance_violations;
                cache_hits += p.fwd.counters.cache_hits;
                pit_aggregations += p.fwd.counters.pit_aggregations;
            }
        }

        let mut clients = Vec::new();
        let mut reports = Vec::new();
        for report in self.reports.iter() {
            let Some(report) = report else { continue };
            let name = report.node.clone();
            let mut err_sum: i128 = 0;
            let mut err_n: u64 = 0;
            let mut summary_true: Option<i64> = None;
            for m in &self.metrics {
                if m.client != name {
                    continue;
                }
                if m.session.is_some() {
                    if let Some(e) = m.abs_error_us {
                        err_sum += e as i128;
                        err_n += 1;
                    }
                } else {
                    // the run's summary row holds the completion-time truth
                    summary_true = m.true_offset_us;
                }
            }
            let mean = if err_n == 0 {
                "0.000".to_string()
            } else {
                format!("{:.3}", err_sum as f64 / err_n as f64)
            };
            let combined = report.sync.as_ref().map(|s| s.combined_offset_us);
            let true_off = summary_true.unwrap_or_default();
            clients.push(ClientSummary {
                client: name,
                samples_received: report.samples_received,
                losses: report.losses,
                discarded: report
                    .sync
                    .as_ref()
                    .map(|s| s.discarded.len() as u64)
                    .unwrap_or(0),
                combined_offset_us: combined,
                true_offset_us: true_off,
                abs_error_us: combined.map(|c| (c - true_off).abs()),
                mean_sample_error_us: mean,
            });
            reports.push(report.clone());
        }

        let passive_sync = self
            .passive_sync
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                v.map(|(t, bias)| PassiveSyncSummary {
                    node: self.cfg.node_name(NodeId(i as u32)).to_string(),
                    last_sync_us: t,
                    bias_us: bias,
                })
            })
            .collect();

        let summary = RunSummary {
            scenario: self.cfg.name.clone(),
            seed: self.seed,
            pit_mode: self.pit_label.clone(),
            strategy: self.strategy_label.clone(),
            duration_us: self.cfg.duration_us,
            events_executed: self.queue.executed(),
            flow_balance_violations,
            cache_hits,
            pit_aggregations,
            clients,
            passive_sync,
            stratum_steps: std::mem::take(&mut self.stratum_steps),
            trail_hash: self.trail.hash_hex(),
        };
        RunOutput {
            metrics: self.metrics,
            summary,
            trail: self.trail,
            clients: reports,
        }
    }
}
