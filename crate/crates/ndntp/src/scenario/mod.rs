//! Scenario loading, static route computation, built-in experiment
//! topologies, the run driver, metrics, and trail audits.

pub mod builtin;
pub mod checks;
pub mod config;
pub mod fib_build;
pub mod metrics;
pub mod run;

pub use builtin::{builtin, builtin_names};
pub use checks::{check_flow_balance, check_freshness, check_pinning, CheckReport};
pub use config::{load_scenario, load_scenario_str, ScenarioConfig, ScenarioError};
pub use fib_build::compute_fib;
pub use metrics::{metrics_csv, metrics_jsonl, MetricsRecord};
pub use run::{run_scenario, ClientReport, Overrides, RunOutput, RunSummary};
