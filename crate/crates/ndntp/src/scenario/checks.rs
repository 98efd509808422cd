//! Post-hoc audits over a run's trail.
//!
//! These deliberately recompute their verdicts from the serialized records
//! rather than trusting the forwarders' own counters, so a trail written to
//! disk can be re-checked later (`ndntp-sim audit`).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::name::{parse_ndntp_name, Name};
use crate::sim::audit::{EventTag, Trail};

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub check: String,
    pub violations: Vec<String>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flow balance: at every node, Data sent toward a face never exceeds the
/// Interests received from that face for the same name. Multi-response PIT
/// entries violate this by construction.
pub fn check_flow_balance(trail: &Trail) -> CheckReport {
    let mut budget: HashMap<(String, u32, String), i64> = HashMap::new();
    let mut violations = Vec::new();
    for r in &trail.records {
        let (Some(face), Some(name), Some(pkt)) = (r.face, r.name.as_ref(), r.pkt) else {
            continue;
        };
        let key = (r.node.clone(), face, name.clone());
        match (r.ev, pkt) {
            (EventTag::Recv, 'I') => {
                *budget.entry(key).or_insert(0) += 1;
            }
            (EventTag::Send, 'D') => {
                let b = budget.entry(key).or_insert(0);
                *b -= 1;
                if *b < 0 {
                    violations.push(format!(
                        "t={} {}: extra Data toward f{} for {}",
                        r.t, r.node, face, name
                    ));
                }
            }
            _ => {}
        }
    }
    CheckReport {
        check: "flow-balance".to_string(),
        violations,
    }
}

/// Freshness: no cache hit may satisfy a MustBeFresh Interest with an entry
/// whose age reached its freshness period.
pub fn check_freshness(trail: &Trail) -> CheckReport {
    let mut violations = Vec::new();
    for r in &trail.records {
        if r.ev != EventTag::CsHit || r.mbf != Some(true) {
            continue;
        }
        let (Some(age), Some(freshness)) = (r.age_us, r.freshness_us) else {
            continue;
        };
        if age >= freshness {
            violations.push(format!(
                "t={} {}: stale cache hit (age {age} >= freshness {freshness}) for {}",
                r.t,
                r.node,
                r.name.as_deref().unwrap_or("?")
            ));
        }
    }
    CheckReport {
        check: "freshness".to_string(),
        violations,
    }
}

/// Pinning: every response a client accepts for one (hash, session) must
/// come from the same producer.
pub fn check_pinning(trail: &Trail) -> CheckReport {
    let mut seen: BTreeMap<(String, Vec<u8>, u64), BTreeSet<String>> = BTreeMap::new();
    for r in &trail.records {
        if r.ev != EventTag::AppRecv {
            continue;
        }
        let (Some(name), Some(producer)) = (r.name.as_ref(), r.producer.as_ref()) else {
            continue;
        };
        let Ok(parsed) = Name::from_text(name).and_then(|n| parse_ndntp_name(&n)) else {
            continue;
        };
        seen.entry((r.node.clone(), parsed.hash, parsed.session))
            .or_default()
            .insert(producer.clone());
    }
    let violations = seen
        .iter()
        .filter(|(_, producers)| producers.len() > 1)
        .map(|((client, hash, session), producers)| {
            format!(
                "{client}: session {session} (hash {}) answered by {:?}",
                hash.iter().map(|b| format!("{b:02x}")).collect::<String>(),
                producers
            )
        })
        .collect();
    CheckReport {
        check: "pinning".to_string(),
        violations,
    }
}
