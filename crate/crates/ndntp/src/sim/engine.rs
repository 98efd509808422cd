//! The event queue: virtual integer-microsecond time with a stable total
//! order. Events firing at the same instant execute in insertion order, so a
//! run is a pure function of the scenario and seed.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::ids::{FaceId, NodeId};
use crate::name::Name;
use crate::packet::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("event scheduled at {fire_at} before current time {now}")]
pub struct PastEvent {
    pub fire_at: u64,
    pub now: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimerKind {
    /// A client (or sync client) sends its i-th request.
    ClientSend { index: u64 },
    /// A pending request reaches its lifetime without being closed.
    RequestTimeout { name: Name },
    /// End of the label discovery window.
    DiscoveryDeadline,
    /// The client run is complete; compute the sync result.
    RunComplete,
    /// A PIT entry reaches its expiry.
    PitExpiry { name: Name },
    /// An aggregating PIT entry must flush what it has.
    AggDeadline { name: Name },
    /// A server's periodic upstream synchronization fires.
    StratumSync,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// Packet arriving at a node's face (from a link, or from the local app
    /// when `face` is the app face).
    Deliver {
        face: FaceId,
        packet: Packet,
    },
    /// Packet handed from a node's pipeline to its local application.
    AppDeliver {
        packet: Packet,
    },
    Timer {
        timer: TimerKind,
    },
    AppStart,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub fire_at: u64,
    pub node: NodeId,
    pub kind: EventKind,
}

#[derive(Debug, PartialEq, Eq)]
struct Queued {
    fire_at: u64,
    seq: u64,
    event: Event,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    now: u64,
    executed: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn schedule(&mut self, event: Event) -> Result<(), PastEvent> {
        if event.fire_at < self.now {
            return Err(PastEvent {
                fire_at: event.fire_at,
                now: self.now,
            });
        }
        let q = Queued {
            fire_at: event.fire_at,
            seq: self.seq,
            event,
        };
        self.seq += 1;
        self.heap.push(Reverse(q));
        Ok(())
    }

    /// Pops the next event at or before `t_end`, advancing virtual time.
    pub fn pop_until(&mut self, t_end: u64) -> Option<Event> {
        match self.heap.peek() {
            Some(Reverse(q)) if q.fire_at <= t_end => {
                let Reverse(q) = self.heap.pop().unwrap();
                self.now = q.fire_at;
                self.executed += 1;
                Some(q.event)
            }
            _ => None,
        }
    }

    /// Drives `handler` over every event up to `t_end` (events it schedules
    /// included), returning how many executed.
    pub fn run_until(&mut self, t_end: u64, mut handler: impl FnMut(&mut Self, Event)) -> u64 {
        let before = self.executed;
        while let Some(event) = self.pop_until(t_end) {
            handler(self, event);
        }
        self.executed - before
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marker(fire_at: u64, tag: u64) -> Event {
        Event {
            fire_at,
            node: NodeId(tag as u32),
            kind: EventKind::AppStart,
        }
    }

    #[test]
    fn equal_time_events_run_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(marker(5, 0)).unwrap();
        q.schedule(marker(5, 1)).unwrap();
        q.schedule(marker(3, 2)).unwrap();
        let order: Vec<u32> = std::iter::from_fn(|| q.pop_until(u64::MAX))
            .map(|e| e.node.0)
            .collect();
        assert_eq!(order, vec![2, 0, 1]);
    }

    #[test]
    fn rejects_events_in_the_past() {
        let mut q = EventQueue::new();
        q.schedule(marker(10, 0)).unwrap();
        assert!(q.pop_until(u64::MAX).is_some());
        assert_eq!(q.now(), 10);
        assert_eq!(
            q.schedule(marker(5, 1)),
            Err(PastEvent {
                fire_at: 5,
                now: 10
            })
        );
    }

    #[test]
    fn pop_until_respects_bound() {
        let mut q = EventQueue::new();
        q.schedule(marker(10, 0)).unwrap();
        assert!(q.pop_until(9).is_none());
        assert!(q.pop_until(10).is_some());
    }

    #[test]
    fn run_until_counts_executed_events() {
        let mut q = EventQueue::new();
        q.schedule(marker(1, 0)).unwrap();
        q.schedule(marker(30, 1)).unwrap();
        let count = q.run_until(20, |q, event| {
            // handlers may schedule follow-ups
            if event.fire_at == 1 {
                q.schedule(marker(5, 2)).unwrap();
            }
        });
        assert_eq!(count, 2);
        assert_eq!(q.executed(), 2);
        assert_eq!(q.now(), 5);
    }
}
