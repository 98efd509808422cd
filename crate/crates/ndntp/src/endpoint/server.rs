//! The time server application: answers requests under its announced
//! prefixes with signed timestamps from its serving clock.

use serde::{Deserialize, Serialize};

use crate::auth::KeyTable;
use crate::clock::ClockModel;
use crate::ids::NodeId;
use crate::name::Name;
use crate::offset::NdntpPayload;
use crate::packet::{data_signing_bytes, Data, DataPayload, Interest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Misbehavior {
    #[default]
    None,
    /// Ignores the low-freshness guideline and stamps a large period.
    LargeFreshness { period_us: u64 },
    /// Lies about its clock by a fixed amount.
    FixedOffsetLie { lie_us: i64 },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub stratum: u32,
    pub announced_prefixes: Vec<Name>,
    pub processing_delay_us: u64,
    pub freshness_period_us: u64,
    pub misbehavior: Misbehavior,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            stratum: 1,
            announced_prefixes: vec![Name::ndntp_prefix()],
            processing_delay_us: 0,
            freshness_period_us: 0,
            misbehavior: Misbehavior::None,
        }
    }
}

#[derive(Debug)]
pub struct ServerApp {
    pub node: NodeId,
    pub cfg: ServerConfig,
    clock: ClockModel,
    /// Accumulated stratum-sync steps applied to the serving clock.
    pub correction_us: i64,
}

impl ServerApp {
    pub fn new(node: NodeId, cfg: ServerConfig, clock: ClockModel) -> Self {
        ServerApp {
            node,
            cfg,
            clock,
            correction_us: 0,
        }
    }

    /// What this server believes the time is.
    pub fn serving_time(&self, now: u64) -> i64 {
        self.clock.local_time(now) + self.correction_us
    }

    /// Builds the signed response for an Interest that arrived `now`. The
    /// Data should be emitted `processing_delay_us` later; the timestamps
    /// already account for that.
    pub fn on_interest(&self, interest: &Interest, now: u64, keys: &KeyTable) -> (Data, u64) {
        let mut t2 = self.serving_time(now);
        let mut t3 = t2 + self.cfg.processing_delay_us as i64;
        if let Misbehavior::FixedOffsetLie { lie_us } = self.cfg.misbehavior {
            t2 += lie_us;
            t3 += lie_us;
        }
        let freshness = match self.cfg.misbehavior {
            Misbehavior::LargeFreshness { period_us } => period_us,
            _ => self.cfg.freshness_period_us,
        };
        let payload = DataPayload::Single(NdntpPayload {
            t2_receive_us: t2,
            t3_transmit_us: t3,
            stratum: self.cfg.stratum,
            server: self.node,
            echo_of_name: interest.name.clone(),
        });
        let signature = keys.sign(self.node, &data_signing_bytes(&interest.name, &payload));
        let data = Data {
            name: interest.name.clone(),
            freshness_period_us: freshness,
            payload,
            signature,
            producer: self.node,
            path_record: interest.discovery_record.clone(),
        };
        (data, self.cfg.processing_delay_us)
    }

    /// One-shot stratum synchronization step.
    pub fn apply_stratum_step(&mut self, combined_offset_us: i64) {
        self.correction_us += combined_offset_us;
    }
}
