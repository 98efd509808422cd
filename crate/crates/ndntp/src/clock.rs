//! Per-node clock models: the ground truth against which every estimate is
//! judged.

use serde::{Deserialize, Serialize};

/// Maximum drift magnitude that keeps `local_time` monotone.
pub const MAX_DRIFT_PPM: i64 = 1_000_000;

/// An affine clock: `local_time(t) = t + offset + floor(drift_ppm * t / 1e6)`.
///
/// All arithmetic is integer microseconds so two runs on different hosts
/// produce bit-identical timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClockModel {
    /// Offset from the simulation reference clock at sim time 0, in µs.
    #[serde(default)]
    pub offset_us: i64,
    /// Drift in parts per million; |drift| must stay below 10^6.
    #[serde(default)]
    pub drift_ppm: i64,
}

impl ClockModel {
    pub fn new(offset_us: i64, drift_ppm: i64) -> Self {
        ClockModel {
            offset_us,
            drift_ppm,
        }
    }

    /// This node's reading of its own clock at simulation time `sim_now_us`.
    pub fn local_time(&self, sim_now_us: u64) -> i64 {
        let drift = (self.drift_ppm as i128 * sim_now_us as i128).div_euclid(1_000_000);
        sim_now_us as i64 + self.offset_us + drift as i64
    }
}
