//! Client and server application state machines.

mod client;
mod server;

pub use client::{
    select_and_combine, ClientConfig, ClientState, DiscardReason, NoUsableSamples, ReceivedSample,
    SampleOutcome, SendPlan, SyncResult,
};
pub use server::{Misbehavior, ServerApp, ServerConfig};
