//! Point-to-point links with fixed delay, optional uniform jitter, loss, and
//! optional per-direction extra delay (the asymmetric delay-attack knob).

use crate::ids::{FaceId, NodeId};
use crate::sim::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkEnd {
    pub node: NodeId,
    pub face: FaceId,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub a: LinkEnd,
    pub b: LinkEnd,
    pub delay_us: u64,
    pub jitter_us: u64,
    pub loss_ppm: u32,
    /// Extra one-way delay applied a→b (e.g. an attacker holding requests).
    pub extra_ab_us: u64,
    /// Extra one-way delay applied b→a.
    pub extra_ba_us: u64,
}

#[derive(Debug)]
pub struct Link {
    pub spec: LinkSpec,
    jitter_rng: RngStream,
    loss_rng: RngStream,
    last_delivery_ab: u64,
    last_delivery_ba: u64,
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmit {
    Deliver { to: LinkEnd, at: u64 },
    Lost,
}

impl Link {
    pub fn new(spec: LinkSpec, jitter_rng: RngStream, loss_rng: RngStream) -> Self {
        Link {
            spec,
            jitter_rng,
            loss_rng,
            last_delivery_ab: 0,
            last_delivery_ba: 0,
            sent: 0,
            delivered: 0,
            lost: 0,
        }
    }

    /// Side (a/b) the given node occupies, if attached to this link.
    pub fn side_of(&self, node: NodeId, face: FaceId) -> Option<bool> {
        if self.spec.a.node == node && self.spec.a.face == face {
            Some(true)
        } else if self.spec.b.node == node && self.spec.b.face == face {
            Some(false)
        } else {
            None
        }
    }

    /// Computes the delivery for a packet entering from side a (or b).
    /// Delivery times are clamped strictly increasing per direction so a
    /// link never reorders.
    pub fn transmit(&mut self, from_a: bool, now: u64) -> Transmit {
        self.sent += 1;
        if self.spec.loss_ppm > 0 && self.loss_rng.next_ppm() < self.spec.loss_ppm {
            self.lost += 1;
            return Transmit::Lost;
        }
        let jitter = if self.spec.jitter_us > 0 {
            self.jitter_rng.next_range(self.spec.jitter_us + 1)
        } else {
            0
        };
        let extra = if from_a {
            self.spec.extra_ab_us
        } else {
            self.spec.extra_ba_us
        };
        let mut at = now + self.spec.delay_us + jitter + extra;
        let last = if from_a {
            &mut self.last_delivery_ab
        } else {
            &mut self.last_delivery_ba
        };
        if at <= *last {
            at = *last + 1;
        }
        *last = at;
        self.delivered += 1;
        Transmit::Deliver {
            to: if from_a { self.spec.b } else { self.spec.a },
            at,
        }
    }
}
