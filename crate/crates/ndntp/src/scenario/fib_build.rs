//! Static route computation, standing in for a routing protocol: for every
//! announced prefix and node, one next hop per neighbor face that lies on a
//! loop-free path to an announcing server, with cost equal to the minimal
//! cumulative link delay via that face.

use std::collections::{BTreeMap, BinaryHeap};

use crate::fib::{Fib, FibEntry, NextHop};
use crate::ids::{FaceId, NodeId};
use crate::scenario::config::{RoleConfig, ScenarioConfig};

/// Where each face of each node attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTarget {
    App,
    Link { link: usize },
}

#[derive(Debug, Clone)]
pub struct Topology {
    /// Per node, indexed by face id; face 0 is the local app.
    pub faces: Vec<Vec<FaceTarget>>,
    /// Per node: face → adjacent node.
    pub neighbors: Vec<BTreeMap<FaceId, NodeId>>,
    /// Per node: face → (link index, peer, link delay).
    adjacency: Vec<Vec<(FaceId, usize, NodeId, u64)>>,
}

impl Topology {
    pub fn build(config: &ScenarioConfig) -> Topology {
        let n = config.nodes.len();
        let mut faces: Vec<Vec<FaceTarget>> = vec![vec![FaceTarget::App]; n];
        let mut neighbors: Vec<BTreeMap<FaceId, NodeId>> = vec![BTreeMap::new(); n];
        let mut adjacency: Vec<Vec<(FaceId, usize, NodeId, u64)>> = vec![Vec::new(); n];
        for (li, link) in config.links.iter().enumerate() {
            for (this, peer) in [(link.a, link.b), (link.b, link.a)] {
                let face = FaceId(faces[this.0 as usize].len() as u32);
                faces[this.0 as usize].push(FaceTarget::Link { link: li });
                neighbors[this.0 as usize].insert(face, peer);
                adjacency[this.0 as usize].push((face, li, peer, link.delay_us));
            }
        }
        Topology {
            faces,
            neighbors,
            adjacency,
        }
    }

    /// Face of `node` attached to link `link`.
    pub fn face_on_link(&self, node: NodeId, link: usize) -> Option<FaceId> {
        self.adjacency[node.0 as usize]
            .iter()
            .find(|(_, li, _, _)| *li == link)
            .map(|(f, _, _, _)| *f)
    }
}

/// Multi-source Dijkstra to the nearest of `sources`, over the graph with
/// `excluded` removed. Distances in cumulative link delay.
fn distances_excluding(
    topo: &Topology,
    sources: &[NodeId],
    excluded: NodeId,
    node_count: usize,
) -> Vec<Option<u64>> {
    let mut dist: Vec<Option<u64>> = vec![None; node_count];
    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, u32)>> = BinaryHeap::new();
    for s in sources {
        if *s != excluded {
            dist[s.0 as usize] = Some(0);
            heap.push(std::cmp::Reverse((0, s.0)));
        }
    }
    while let Some(std::cmp::Reverse((d, n))) = heap.pop() {
        if dist[n as usize] != Some(d) {
            continue;
        }
        for (_, _, peer, delay) in &topo.adjacency[n as usize] {
            if *peer == excluded {
                continue;
            }
            let nd = d + delay;
            let slot = &mut dist[peer.0 as usize];
            if slot.is_none_or(|old| nd < old) {
                *slot = Some(nd);
                heap.push(std::cmp::Reverse((nd, peer.0)));
            }
        }
    }
    dist
}

/// Computes every node's FIB.
pub fn compute_fib(config: &ScenarioConfig) -> Vec<Fib> {
    let topo = Topology::build(config);
    compute_fib_with(config, &topo)
}

pub fn compute_fib_with(config: &ScenarioConfig, topo: &Topology) -> Vec<Fib> {
    let n = config.nodes.len();
    let announced = config.announced_prefixes();
    let mut per_node_entries: Vec<Vec<FibEntry>> = vec![Vec::new(); n];

    for (prefix, servers) in &announced {
        for (node, entries) in per_node_entries.iter_mut().enumerate() {
            let node_id = NodeId(node as u32);
            let mut hops: Vec<NextHop> = Vec::new();
            if servers.contains(&node_id) {
                // the server's own application answers at cost 0
                if let RoleConfig::Server { .. } = config.nodes[node].role {
                    hops.push(NextHop {
                        face: FaceId::APP,
                        cost_us: 0,
                    });
                }
            }
            let dist = distances_excluding(topo, servers, node_id, n);
            for (face, _, peer, delay) in &topo.adjacency[node] {
                if let Some(d) = dist[peer.0 as usize] {
                    hops.push(NextHop {
                        face: *face,
                        cost_us: delay + d,
                    });
                }
            }
            if !hops.is_empty() {
                entries.push(FibEntry::new(prefix.clone(), hops));
            }
        }
    }
    per_node_entries.into_iter().map(Fib::new).collect()
}
