//! Built-in scenarios, embedded so `run --scenario <name>` works anywhere.
//! The files live under `scenarios/` in the crate and are ordinary scenario
//! TOML; `load_scenario` accepts a path to any of them too.

use crate::scenario::config::{load_scenario_str, ScenarioConfig, ScenarioError};

const BUILTINS: &[(&str, &str)] = &[
    ("fig2", include_str!("../../scenarios/fig2.toml")),
    (
        "session-pin",
        include_str!("../../scenarios/session-pin.toml"),
    ),
    (
        "path-label",
        include_str!("../../scenarios/path-label.toml"),
    ),
    ("hop-limit", include_str!("../../scenarios/hop-limit.toml")),
    (
        "probabilistic",
        include_str!("../../scenarios/probabilistic.toml"),
    ),
    ("freshness", include_str!("../../scenarios/freshness.toml")),
    (
        "freshness-clamp",
        include_str!("../../scenarios/freshness-clamp.toml"),
    ),
    ("agg-skew", include_str!("../../scenarios/agg-skew.toml")),
    (
        "delay-attack",
        include_str!("../../scenarios/delay-attack.toml"),
    ),
    ("strata", include_str!("../../scenarios/strata.toml")),
    ("responder", include_str!("../../scenarios/responder.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let text = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            ScenarioError::Validation(format!(
                "unknown scenario {name}; built-ins: {}",
                builtin_names().join(", ")
            ))
        })?;
    load_scenario_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_load() {
        for name in builtin_names() {
            let cfg = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
    }

    #[test]
    fn registry_has_at_least_eight() {
        assert!(builtin_names().len() >= 8);
    }

    #[test]
    fn fig2_shape_matches_expectations() {
        let cfg = builtin("fig2").unwrap();
        assert_eq!(cfg.nodes.len(), 5);
        assert_eq!(cfg.links.len(), 4);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(builtin("nope").is_err());
    }
}
