//! Four-timestamp clock offset and round-trip delay arithmetic.

use serde::{Deserialize, Serialize};

use crate::ids::NodeId;
use crate::name::Name;

/// Round-trip delay came out negative: the timestamps are inconsistent
/// (clock anomaly) and the caller should discard the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("negative round-trip delay")]
pub struct NegativeDelay;

/// Standard four-timestamp estimates:
///
/// ```text
/// offset = ((t2 - t1) + (t3 - t4)) / 2
/// delay  =  (t4 - t1) - (t3 - t2)
/// ```
///
/// t1/t4 are client-clock send/receive times, t2/t3 the server-clock
/// receive/transmit times, all integer µs. The halving truncates toward
/// zero. With symmetric path delays the offset estimate is exact.
pub fn ntp_offset_delay(t1: i64, t2: i64, t3: i64, t4: i64) -> Result<(i64, i64), NegativeDelay> {
    let delay = (t4 as i128 - t1 as i128) - (t3 as i128 - t2 as i128);
    if delay < 0 {
        return Err(NegativeDelay);
    }
    let offset = ((t2 as i128 - t1 as i128) + (t3 as i128 - t4 as i128)) / 2;
    Ok((offset as i64, delay as i64))
}

/// Server-side timestamps and identity carried in a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdntpPayload {
    pub t2_receive_us: i64,
    pub t3_transmit_us: i64,
    pub stratum: u32,
    pub server: NodeId,
    pub echo_of_name: Name,
}

/// One completed timestamp exchange, with the derived estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub t1_send_us: i64,
    pub t4_recv_us: i64,
    pub payload: NdntpPayload,
    pub offset_us: i64,
    pub delay_us: i64,
    pub server: NodeId,
    pub session: u64,
    pub sample_index: u64,
}

impl Sample {
    /// Derives offset/delay from a payload and the client-side timestamps.
    pub fn from_exchange(
        t1_send_us: i64,
        t4_recv_us: i64,
        payload: NdntpPayload,
        session: u64,
        sample_index: u64,
    ) -> Result<Sample, NegativeDelay> {
        let (offset_us, delay_us) = ntp_offset_delay(
            t1_send_us,
            payload.t2_receive_us,
            payload.t3_transmit_us,
            t4_recv_us,
        )?;
        Ok(Sample {
            t1_send_us,
            t4_recv_us,
            server: payload.server,
            payload,
            offset_us,
            delay_us,
            session,
            sample_index,
        })
    }
}
