//! `ndntp-sim`: run simulation scenarios, sweep seeds, and audit trails.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use ndntp::pit::PitMode;
use ndntp::scenario::{
    builtin, builtin_names, check_flow_balance, check_freshness, check_pinning, load_scenario,
    metrics_csv, metrics_jsonl, run_scenario, CheckReport, Overrides, RunOutput, ScenarioConfig,
    ScenarioError,
};
use ndntp::sim::Trail;
use ndntp::strategy::StrategyKind;

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_AUDIT: i32 = 2;

#[derive(Parser)]
#[command(
    name = "ndntp-sim",
    version,
    about = "Deterministic NDN time-sync simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics, summary, and audit trail.
    Run {
        /// Built-in scenario name or path to a scenario TOML file.
        #[arg(long)]
        scenario: String,
        /// Seed override (also NDNTP_SIM_SEED; the scenario file is the fallback).
        #[arg(long)]
        seed: Option<u64>,
        /// PIT mode override for every forwarder: standard | aggregate | multi-response.
        #[arg(long)]
        pit_mode: Option<String>,
        /// Strategy override for every node: best-route | session-pin |
        /// hop-limit | probabilistic | multicast | path-label.
        #[arg(long)]
        strategy: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Metrics format: csv | jsonl.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Built-in scenario registry.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
    /// Run one scenario over a range of seeds, merging metrics by seed order.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Inclusive seed range, e.g. 0..99.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        pit_mode: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Check a written audit trail.
    Audit {
        /// Path to a trail.jsonl written by `run`.
        #[arg(long)]
        trail: PathBuf,
        /// flow-balance | freshness | pinning
        #[arg(long)]
        check: String,
    },
}

#[derive(Subcommand)]
enum ScenariosAction {
    /// Print the built-in scenario names.
    List,
}

fn main() {
    std::process::exit(run_cli(Cli::parse()));
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_VALIDATION
}

fn run_cli(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            pit_mode,
            strategy,
            out,
            format,
        } => cmd_run(&scenario, seed, pit_mode, strategy, &out, &format),
        Command::Scenarios {
            action: ScenariosAction::List,
        } => {
            for name in builtin_names() {
                println!("{name}");
            }
            EXIT_OK
        }
        Command::Sweep {
            scenario,
            seeds,
            pit_mode,
            strategy,
            out,
            format,
        } => cmd_sweep(&scenario, &seeds, pit_mode, strategy, &out, &format),
        Command::Audit { trail, check } => cmd_audit(&trail, &check),
    }
}

fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, ScenarioError> {
    if builtin_names().contains(&arg) {
        builtin(arg)
    } else {
        load_scenario(arg)
    }
}

fn build_overrides(
    seed: Option<u64>,
    pit_mode: Option<String>,
    strategy: Option<String>,
) -> Result<Overrides, String> {
    let seed = match seed {
        Some(s) => Some(s),
        None => match std::env::var("NDNTP_SIM_SEED") {
            Ok(v) => Some(
                v.parse::<u64>()
                    .map_err(|_| format!("NDNTP_SIM_SEED is not a number: {v}"))?,
            ),
            Err(_) => None,
        },
    };
    let pit_mode = match pit_mode {
        None => None,
        Some(m) => Some(PitMode::parse(&m).ok_or_else(|| format!("unknown pit mode {m}"))?),
    };
    let strategy = match strategy {
        None => None,
        Some(s) => Some(StrategyKind::parse(&s).ok_or_else(|| format!("unknown strategy {s}"))?),
    };
    Ok(Overrides {
        seed,
        pit_mode,
        strategy,
    })
}

fn write_outputs(out_dir: &Path, output: &RunOutput, format: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let metrics = match format {
        "jsonl" => ("metrics.jsonl", metrics_jsonl(&output.metrics)),
        _ => ("metrics.csv", metrics_csv(&output.metrics)),
    };
    std::fs::write(out_dir.join(metrics.0), metrics.1)?;
    std::fs::write(out_dir.join("trail.jsonl"), output.trail.to_jsonl())?;
    let summary = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    std::fs::write(out_dir.join("summary.json"), summary)?;
    Ok(())
}

fn cmd_run(
    scenario: &str,
    seed: Option<u64>,
    pit_mode: Option<String>,
    strategy: Option<String>,
    out: &Path,
    format: &str,
) -> i32 {
    if format != "csv" && format != "jsonl" {
        return fail(format!("unknown format {format}"));
    }
    let overrides = match build_overrides(seed, pit_mode, strategy) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let config = match resolve_scenario(scenario) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let output = match run_scenario(&config, &overrides) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Err(e) = write_outputs(out, &output, format) {
        return fail(e);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&output.summary).expect("summary serializes")
    );
    EXIT_OK
}

fn parse_seed_range(text: &str) -> Result<(u64, u64), String> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| format!("seed range must look like 0..99, got {text}"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad seed {a}"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad seed {b}"))?;
    if b < a {
        return Err(format!("empty seed range {text}"));
    }
    Ok((a, b))
}

fn cmd_sweep(
    scenario: &str,
    seeds: &str,
    pit_mode: Option<String>,
    strategy: Option<String>,
    out: &Path,
    format: &str,
) -> i32 {
    let (first, last) = match parse_seed_range(seeds) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let overrides = match build_overrides(None, pit_mode, strategy) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let config = match resolve_scenario(scenario) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };

    let mut metrics = Vec::new();
    let mut summaries = String::new();
    for seed in first..=last {
        let per_seed = Overrides {
            seed: Some(seed),
            ..overrides.clone()
        };
        let output = match run_scenario(&config, &per_seed) {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        metrics.extend(output.metrics);
        summaries.push_str(&serde_json::to_string(&output.summary).expect("summary serializes"));
        summaries.push('\n');
    }
    if let Err(e) = std::fs::create_dir_all(out) {
        return fail(e);
    }
    let (name, body) = match format {
        "jsonl" => ("metrics.jsonl", metrics_jsonl(&metrics)),
        _ => ("metrics.csv", metrics_csv(&metrics)),
    };
    if let Err(e) = std::fs::write(out.join(name), body) {
        return fail(e);
    }
    if let Err(e) = std::fs::write(out.join("summaries.jsonl"), summaries) {
        return fail(e);
    }
    println!("swept seeds {first}..{last}: {} metric rows", metrics.len());
    EXIT_OK
}

fn cmd_audit(trail_path: &Path, check: &str) -> i32 {
    let text = match std::fs::read_to_string(trail_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", trail_path.display())),
    };
    let trail = match Trail::parse_jsonl(&text) {
        Ok(t) => t,
        Err(e) => return fail(format!("bad trail: {e}")),
    };
    let report: CheckReport = match check {
        "flow-balance" => check_flow_balance(&trail),
        "freshness" => check_freshness(&trail),
        "pinning" => check_pinning(&trail),
        other => return fail(format!("unknown check {other}")),
    };
    if report.ok() {
        println!("{}: ok ({} records)", report.check, trail.records.len());
        EXIT_OK
    } else {
        println!("{}: {} violation(s)", report.check, report.violations.len());
        for v in &report.violations {
            println!("  {v}");
        }
        EXIT_AUDIT
    }
}
