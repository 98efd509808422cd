//! Scenario files: a TOML description of nodes, links, strategies, and the
//! experiment parameters. Parsing is strict (unknown keys are rejected) and
//! validation covers id references, value ranges, and client-to-server
//! reachability for every referenced prefix.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::clock::{ClockModel, MAX_DRIFT_PPM};
use crate::cs::CsPolicy;
use crate::endpoint::{ClientConfig, Misbehavior, ServerConfig};
use crate::forwarder::{
    ForwarderConfig, ResponderConfig, DEFAULT_AGG_TIMEOUT_US, DEFAULT_CS_CAPACITY,
    DEFAULT_DEAD_NONCE_TTL_US,
};
use crate::ids::NodeId;
use crate::name::{Name, PPM_SCALE};
use crate::packet::DEFAULT_LIFETIME_US;
use crate::pit::PitMode;
use crate::rate::RateLimitConfig;
use crate::strategy::StrategyKind;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn validation(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

// ---- raw file schema ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    duration_us: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    pit_mode: PitMode,
    #[serde(default)]
    strategy_label: Option<String>,
    #[serde(default)]
    trust_anchors: Vec<String>,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    strategies: Vec<RawStrategy>,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    role: String,
    #[serde(default)]
    clock: ClockModel,
    #[serde(default)]
    client: Option<RawClient>,
    #[serde(default)]
    forwarder: Option<RawForwarder>,
    #[serde(default)]
    server: Option<RawServer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClient {
    #[serde(default = "default_sessions")]
    servers_per_run: u64,
    #[serde(default = "default_samples")]
    samples_per_server: u64,
    #[serde(default = "default_rtt_threshold")]
    rtt_threshold_us: u64,
    #[serde(default = "default_cluster_tolerance")]
    cluster_tolerance_us: u64,
    #[serde(default)]
    probability: Option<f64>,
    #[serde(default)]
    hop_limit: Option<u8>,
    #[serde(default = "default_true")]
    use_random_hash: bool,
    #[serde(default = "default_true")]
    must_be_fresh: bool,
    #[serde(default = "default_gap")]
    inter_sample_gap_us: u64,
    #[serde(default = "default_lifetime")]
    lifetime_us: u64,
    #[serde(default)]
    use_path_labels: bool,
    #[serde(default)]
    start_at_us: u64,
}

fn default_sessions() -> u64 {
    4
}
fn default_samples() -> u64 {
    4
}
fn default_rtt_threshold() -> u64 {
    250_000
}
fn default_cluster_tolerance() -> u64 {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_gap() -> u64 {
    10_000
}
fn default_lifetime() -> u64 {
    DEFAULT_LIFETIME_US
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawForwarder {
    #[serde(default = "default_cs_capacity")]
    cs_capacity: usize,
    #[serde(default)]
    cs_policy: CsPolicy,
    #[serde(default)]
    responder_max_age_us: Option<u64>,
    #[serde(default)]
    passive_sync: bool,
    #[serde(default)]
    rate_limit: Option<RawRateLimit>,
    #[serde(default = "default_dead_nonce_ttl")]
    dead_nonce_ttl_us: u64,
    #[serde(default = "default_agg_timeout")]
    agg_timeout_us: u64,
    #[serde(default)]
    pit_mode: Option<PitMode>,
}

fn default_cs_capacity() -> usize {
    DEFAULT_CS_CAPACITY
}
fn default_dead_nonce_ttl() -> u64 {
    DEFAULT_DEAD_NONCE_TTL_US
}
fn default_agg_timeout() -> u64 {
    DEFAULT_AGG_TIMEOUT_US
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRateLimit {
    prefix: String,
    rate_per_s: u64,
    burst: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServer {
    #[serde(default = "default_stratum")]
    stratum: u32,
    #[serde(default)]
    announced_prefixes: Option<Vec<String>>,
    #[serde(default)]
    processing_delay_us: u64,
    #[serde(default)]
    freshness_period_us: u64,
    #[serde(default)]
    misbehavior: Misbehavior,
    #[serde(default)]
    stratum_sync: Option<RawStratumSync>,
}

fn default_stratum() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStratumSync {
    start_at_us: u64,
    #[serde(default)]
    period_us: Option<u64>,
    #[serde(default = "default_sync_sessions")]
    sessions: u64,
    #[serde(default = "default_samples")]
    samples: u64,
    #[serde(default = "default_gap")]
    gap_us: u64,
    #[serde(default = "default_rtt_threshold")]
    rtt_threshold_us: u64,
}

fn default_sync_sessions() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    a: String,
    b: String,
    delay_us: u64,
    #[serde(default)]
    jitter_us: u64,
    #[serde(default)]
    loss_rate: f64,
    #[serde(default)]
    extra_ab_us: u64,
    #[serde(default)]
    extra_ba_us: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    node: String,
    #[serde(default = "default_prefix")]
    prefix: String,
    kind: String,
    #[serde(default)]
    threshold: Option<u8>,
}

fn default_prefix() -> String {
    "/NDNTP/time".to_string()
}

// ---- validated configuration ----

#[derive(Debug, Clone)]
pub struct StratumSyncConfig {
    pub start_at_us: u64,
    pub period_us: Option<u64>,
    pub client: ClientConfig,
}

#[derive(Debug, Clone)]
pub enum RoleConfig {
    Client(ClientConfig),
    Forwarder,
    Server {
        server: ServerConfig,
        stratum_sync: Option<StratumSyncConfig>,
    },
}

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub name: String,
    pub clock: ClockModel,
    pub role: RoleConfig,
    /// Pipeline configuration; unused for client nodes.
    pub forwarder: ForwarderConfig,
    pub pit_mode_override: Option<PitMode>,
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub a: NodeId,
    pub b: NodeId,
    pub delay_us: u64,
    pub jitter_us: u64,
    pub loss_ppm: u32,
    pub extra_ab_us: u64,
    pub extra_ba_us: u64,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub duration_us: u64,
    pub seed: u64,
    pub pit_mode: PitMode,
    pub strategy_label: Option<String>,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
    pub strategies: Vec<(NodeId, Name, StrategyKind)>,
    pub trust_anchors: BTreeSet<NodeId>,
}

impl ScenarioConfig {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(|i| NodeId(i as u32))
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0 as usize].name
    }

    pub fn client_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.role, RoleConfig::Client(_)))
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Every (prefix → announcing servers) pair in the scenario.
    pub fn announced_prefixes(&self) -> BTreeMap<Name, Vec<NodeId>> {
        let mut map: BTreeMap<Name, Vec<NodeId>> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let RoleConfig::Server { server, .. } = &node.role {
                for prefix in &server.announced_prefixes {
                    map.entry(prefix.clone())
                        .or_default()
                        .push(NodeId(i as u32));
                }
            }
        }
        map
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

pub fn load_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate(raw)
}

fn parse_prefix(text: &str) -> Result<Name, ScenarioError> {
    Name::from_text(text).map_err(|e| validation(format!("bad prefix {text}: {e}")))
}

fn validate(raw: RawScenario) -> Result<ScenarioConfig, ScenarioError> {
    if raw.nodes.is_empty() {
        return Err(validation("scenario has no nodes"));
    }
    let mut names = BTreeSet::new();
    for n in &raw.nodes {
        if !names.insert(n.id.clone()) {
            return Err(validation(format!("duplicate node id {}", n.id)));
        }
    }
    let index: BTreeMap<&str, NodeId> = raw
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), NodeId(i as u32)))
        .collect();

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in &raw.nodes {
        if n.clock.drift_ppm.abs() >= MAX_DRIFT_PPM {
            return Err(validation(format!(
                "node {}: |drift_ppm| must be below {MAX_DRIFT_PPM}",
                n.id
            )));
        }
        let role = match n.role.as_str() {
            "client" => {
                if n.forwarder.is_some() || n.server.is_some() {
                    return Err(validation(format!(
                        "node {}: client role takes only a [nodes.client] section",
                        n.id
                    )));
                }
                let c = n.client.as_ref().ok_or_else(|| {
                    validation(format!("node {}: missing [nodes.client] section", n.id))
                })?;
                RoleConfig::Client(client_config(&n.id, c)?)
            }
            "forwarder" => {
                if n.client.is_some() || n.server.is_some() {
                    return Err(validation(format!(
                        "node {}: forwarder role takes only a [nodes.forwarder] section",
                        n.id
                    )));
                }
                RoleConfig::Forwarder
            }
            "server" => {
                if n.client.is_some() {
                    return Err(validation(format!(
                        "node {}: server role takes no [nodes.client] section",
                        n.id
                    )));
                }
                let s = n.server.as_ref().ok_or_else(|| {
                    validation(format!("node {}: missing [nodes.server] section", n.id))
                })?;
                server_role(&n.id, s)?
            }
            other => {
                return Err(validation(format!("node {}: unknown role {other}", n.id)));
            }
        };
        let forwarder = forwarder_config(&n.id, n.forwarder.as_ref(), raw.pit_mode)?;
        nodes.push(NodeConfig {
            name: n.id.clone(),
            clock: n.clock,
            pit_mode_override: n.forwarder.as_ref().and_then(|f| f.pit_mode),
            role,
            forwarder,
        });
    }

    let mut links = Vec::with_capacity(raw.links.len());
    for (i, l) in raw.links.iter().enumerate() {
        let a = *index
            .get(l.a.as_str())
            .ok_or_else(|| validation(format!("link {i}: unknown node {}", l.a)))?;
        let b = *index
            .get(l.b.as_str())
            .ok_or_else(|| validation(format!("link {i}: unknown node {}", l.b)))?;
        if a == b {
            return Err(validation(format!("link {i}: connects {} to itself", l.a)));
        }
        if l.delay_us == 0 {
            return Err(validation(format!("link {i}: delay_us must be positive")));
        }
        if !(0.0..=1.0).contains(&l.loss_rate) {
            return Err(validation(format!("link {i}: loss_rate outside [0, 1]")));
        }
        links.push(LinkConfig {
            a,
            b,
            delay_us: l.delay_us,
            jitter_us: l.jitter_us,
            loss_ppm: (l.loss_rate * PPM_SCALE as f64).round() as u32,
            extra_ab_us: l.extra_ab_us,
            extra_ba_us: l.extra_ba_us,
        });
    }

    let mut strategies = Vec::new();
    for s in &raw.strategies {
        let node = *index
            .get(s.node.as_str())
            .ok_or_else(|| validation(format!("strategy: unknown node {}", s.node)))?;
        let prefix = parse_prefix(&s.prefix)?;
        let mut kind = StrategyKind::parse(&s.kind)
            .ok_or_else(|| validation(format!("strategy: unknown kind {}", s.kind)))?;
        match (&mut kind, s.threshold) {
            (StrategyKind::HopLimit { threshold }, Some(t)) => *threshold = t,
            (StrategyKind::HopLimit { .. }, None) => {}
            (_, Some(_)) => {
                return Err(validation(format!(
                    "strategy {}: threshold only applies to hop-limit",
                    s.kind
                )))
            }
            _ => {}
        }
        strategies.push((node, prefix, kind));
    }

    let mut trust_anchors = BTreeSet::new();
    for a in &raw.trust_anchors {
        let id = *index
            .get(a.as_str())
            .ok_or_else(|| validation(format!("trust anchor references unknown node {a}")))?;
        trust_anchors.insert(id);
    }

    let config = ScenarioConfig {
        name: raw.name,
        description: raw.description,
        duration_us: raw.duration_us,
        seed: raw.seed,
        pit_mode: raw.pit_mode,
        strategy_label: raw.strategy_label,
        nodes,
        links,
        strategies,
        trust_anchors,
    };
    check_reachability(&config)?;
    Ok(config)
}

fn client_config(id: &str, raw: &RawClient) -> Result<ClientConfig, ScenarioError> {
    if raw.servers_per_run == 0 || raw.samples_per_server == 0 {
        return Err(validation(format!(
            "node {id}: servers_per_run and samples_per_server must be at least 1"
        )));
    }
    let probability_ppm = match raw.probability {
        None => None,
        Some(p) if (0.0..=1.0).contains(&p) => Some((p * PPM_SCALE as f64).round() as u32),
        Some(p) => {
            return Err(validation(format!("node {id}: P={p} outside [0, 1]")));
        }
    };
    Ok(ClientConfig {
        servers_per_run: raw.servers_per_run,
        samples_per_server: raw.samples_per_server,
        rtt_threshold_us: raw.rtt_threshold_us,
        cluster_tolerance_us: raw.cluster_tolerance_us,
        probability_ppm,
        hop_limit: raw.hop_limit,
        use_random_hash: raw.use_random_hash,
        must_be_fresh: raw.must_be_fresh,
        inter_sample_gap_us: raw.inter_sample_gap_us,
        lifetime_us: raw.lifetime_us,
        use_path_labels: raw.use_path_labels,
        start_at_us: raw.start_at_us,
    })
}

fn server_role(id: &str, raw: &RawServer) -> Result<RoleConfig, ScenarioError> {
    if raw.stratum == 0 {
        return Err(validation(format!("node {id}: stratum must be at least 1")));
    }
    let announced = match &raw.announced_prefixes {
        Some(list) => {
            let mut parsed = Vec::new();
            for p in list {
                parsed.push(parse_prefix(p)?);
            }
            if !parsed.iter().any(|p| *p == Name::ndntp_prefix()) {
                return Err(validation(format!(
                    "node {id}: servers must announce /NDNTP/time"
                )));
            }
            for p in &parsed {
                if let Some(crate::name::Component::Stratum(n)) = p.components.get(2) {
                    if p.len() == 3 && *n != raw.stratum {
                        return Err(validation(format!(
                            "node {id}: announced stratum prefix {p} does not match stratum {}",
                            raw.stratum
                        )));
                    }
                }
            }
            parsed
        }
        None => vec![Name::ndntp_prefix(), Name::stratum_prefix(raw.stratum)],
    };
    let stratum_sync = match &raw.stratum_sync {
        None => None,
        Some(s) => {
            if raw.stratum < 2 {
                return Err(validation(format!(
                    "node {id}: stratum_sync requires stratum >= 2"
                )));
            }
            Some(StratumSyncConfig {
                start_at_us: s.start_at_us,
                period_us: s.period_us.filter(|p| *p > 0),
                client: ClientConfig {
                    servers_per_run: s.sessions,
                    samples_per_server: s.samples,
                    rtt_threshold_us: s.rtt_threshold_us,
                    inter_sample_gap_us: s.gap_us,
                    start_at_us: s.start_at_us,
                    ..ClientConfig::default()
                },
            })
        }
    };
    Ok(RoleConfig::Server {
        server: ServerConfig {
            stratum: raw.stratum,
            announced_prefixes: announced,
            processing_delay_us: raw.processing_delay_us,
            freshness_period_us: raw.freshness_period_us,
            misbehavior: raw.misbehavior,
        },
        stratum_sync,
    })
}

fn forwarder_config(
    id: &str,
    raw: Option<&RawForwarder>,
    global_pit: PitMode,
) -> Result<ForwarderConfig, ScenarioError> {
    let Some(raw) = raw else {
        return Ok(ForwarderConfig {
            pit_mode: global_pit,
            ..ForwarderConfig::default()
        });
    };
    if raw.responder_max_age_us == Some(0) {
        return Err(validation(format!(
            "node {id}: responder_max_age_us must be positive"
        )));
    }
    let rate_limit = match &raw.rate_limit {
        None => None,
        Some(r) => Some(RateLimitConfig {
            prefix: parse_prefix(&r.prefix)?,
            rate_per_s: r.rate_per_s,
            burst: r.burst,
        }),
    };
    Ok(ForwarderConfig {
        pit_mode: raw.pit_mode.unwrap_or(global_pit),
        cs_capacity: raw.cs_capacity,
        cs_policy: raw.cs_policy,
        responder: raw
            .responder_max_age_us
            .map(|max_age_us| ResponderConfig { max_age_us }),
        passive_sync: raw.passive_sync,
        rate_limit,
        dead_nonce_ttl_us: raw.dead_nonce_ttl_us,
        agg_timeout_us: raw.agg_timeout_us,
    })
}

/// Breadth-first reachability over links; every client (and every
/// stratum-syncing server) must reach at least one server announcing its
/// target prefix.
fn check_reachability(config: &ScenarioConfig) -> Result<(), ScenarioError> {
    let announced = config.announced_prefixes();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); config.nodes.len()];
    for l in &config.links {
        adjacency[l.a.0 as usize].push(l.b.0 as usize);
        adjacency[l.b.0 as usize].push(l.a.0 as usize);
    }
    let reachable_from = |start: usize| -> Vec<bool> {
        let mut seen = vec![false; config.nodes.len()];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            for &m in &adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    };

    let mut targets: Vec<(NodeId, Name)> = Vec::new();
    for (i, node) in config.nodes.iter().enumerate() {
        match &node.role {
            RoleConfig::Client(_) => {
                targets.push((NodeId(i as u32), Name::ndntp_prefix()));
            }
            RoleConfig::Server {
                server,
                stratum_sync: Some(_),
            } => {
                targets.push((NodeId(i as u32), Name::stratum_prefix(server.stratum - 1)));
            }
            _ => {}
        }
    }
    for (node, prefix) in targets {
        let servers = announced.get(&prefix).ok_or_else(|| {
            validation(format!(
                "{}: unreachable prefix {prefix} (no server announces it)",
                config.node_name(node)
            ))
        })?;
        let seen = reachable_from(node.0 as usize);
        let ok = servers.iter().any(|s| *s == node || seen[s.0 as usize]);
        if !ok {
            return Err(validation(format!(
                "{}: unreachable prefix {prefix}",
                config.node_name(node)
            )));
        }
    }
    Ok(())
}
