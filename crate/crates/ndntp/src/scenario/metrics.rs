//! Per-sample metrics rows and their CSV/JSONL encodings.

use serde::{Deserialize, Serialize};

/// One row per received response (plus one per loss), and one summary row
/// per client run with the combined estimate. Column order is fixed;
/// identical runs produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    pub client: String,
    pub session: Option<u64>,
    pub sample: Option<u64>,
    /// Responding server; inner producers joined with `+` for aggregates;
    /// empty for losses and summary rows.
    pub server_reached: String,
    pub rtt_us: Option<i64>,
    pub est_offset_us: Option<i64>,
    pub true_offset_us: Option<i64>,
    pub abs_error_us: Option<i64>,
    pub discarded_reason: String,
    pub pit_mode: String,
    pub strategy: String,
}

pub const CSV_HEADER: &str = "run_id,client,session,sample,server_reached,rtt_us,est_offset_us,true_offset_us,abs_error_us,discarded_reason,pit_mode,strategy";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.client,
            opt(&r.session),
            opt(&r.sample),
            r.server_reached,
            opt(&r.rtt_us),
            opt(&r.est_offset_us),
            opt(&r.true_offset_us),
            opt(&r.abs_error_us),
            r.discarded_reason,
            r.pit_mode,
            r.strategy,
        ));
    }
    out
}

pub fn metrics_jsonl(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}
