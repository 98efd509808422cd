//! A deterministic discrete-event simulator and protocol library for time
//! synchronization over Named Data Networking.
//!
//! The library has three layers:
//!
//! * protocol primitives ([`name`], [`packet`], [`clock`], [`offset`],
//!   [`auth`]): the `/NDNTP/time` namespace, Interest/Data packets, clock
//!   models, the four-timestamp offset math, and keyed-hash envelopes;
//! * the forwarding plane ([`fib`], [`cs`], [`pit`], [`rate`],
//!   [`strategy`], [`forwarder`]): an NDN forwarding pipeline with three PIT
//!   consumption modes, freshness-aware caching, session pinning, hop-limit
//!   and probabilistic distance selection, multicast fan-out, path labels,
//!   response aggregation, per-prefix throttling, and optional in-network
//!   responder/passive-sync modes;
//! * endpoints and the harness ([`endpoint`], [`sim`], [`scenario`]):
//!   client/server state machines, the event engine, and scenario loading,
//!   static route computation, built-in experiment topologies, metrics and
//!   audit checks.
//!
//! Everything is integer microseconds end to end; a run is a pure function
//! of the scenario file and the seed.

pub mod auth;
pub mod clock;
pub mod cs;
pub mod endpoint;
pub mod fib;
pub mod forwarder;
pub mod ids;
pub mod name;
pub mod offset;
pub mod packet;
pub mod pit;
pub mod rate;
pub mod scenario;
pub mod sim;
pub mod strategy;

pub use ids::{FaceId, NodeId};
pub use name::{build_ndntp_name, parse_ndntp_name, Decorations, Name};
pub use offset::ntp_offset_delay;
