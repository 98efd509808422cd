//! Deterministic discrete-event core: virtual time, links, per-scope random
//! streams, and the audit trail.

pub mod audit;
pub mod engine;
pub mod link;
pub mod rng;

pub use audit::{AuditRecord, EventTag, Trail};
pub use engine::{Event, EventKind, EventQueue, PastEvent, TimerKind};
pub use link::{Link, LinkEnd, LinkSpec, Transmit};
pub use rng::{RngStream, Scope};
