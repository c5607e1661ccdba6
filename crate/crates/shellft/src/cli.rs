//! Command-line entry point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use shellft_core::sim::{check_liveness, check_safety};
use shellft_core::tailor::{classify, tailor, DependencyGraph, Preset, ShellSelection, SystemBlueprint};
use shellft_core::Millis;

use crate::campaign::{run_campaign, CampaignKind};
use crate::scenario::{execute, RunSpec, Standard};
use crate::workload::WorkloadSpec;
use crate::{blueprint_io, report, script, trace_io};

#[derive(Debug, Parser)]
#[command(name = "shellft", version, about = "Tailor, simulate and check selectively hybridized replication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a blueprint from a shell selection.
    Tailor {
        /// Preset name or comma-separated base roles.
        #[arg(long)]
        shell: ShellSelection,
        #[arg(short, default_value_t = 1)]
        f: u32,
        /// Write the blueprint here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the classified dependency graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Simulate a blueprint and write the trace and metrics.
    Run {
        #[arg(long, conflicts_with = "preset")]
        blueprint: Option<PathBuf>,
        /// Tailor a preset instead of reading a blueprint.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(short, default_value_t = 1)]
        f: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        horizon: Millis,
        /// Fault script file.
        #[arg(long)]
        fault: Option<PathBuf>,
        /// Workload, e.g. `clients=4,rate=200,updates=0.5`.
        #[arg(long)]
        workload: Option<WorkloadSpec>,
        /// Record every delivered message.
        #[arg(long)]
        deliveries: bool,
        #[arg(long, default_value_t = 2000)]
        settle: Millis,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the standard fault scenarios.
    Scenario {
        #[arg(value_parser = parse_standard)]
        name: Standard,
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a trace file for safety and liveness.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Defaults to the stabilization time recorded in the trace.
        #[arg(long)]
        gst: Option<Millis>,
        #[arg(long, default_value_t = 2000)]
        settle: Millis,
    },
    /// Replica cost and exploit-resilience tables.
    Cost {
        /// Preset name or `all`.
        #[arg(long, default_value = "all")]
        preset: String,
        #[arg(short, default_value_t = 1)]
        f: u32,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exhaustively check the distribution and relay patterns.
    CheckPatterns {
        #[arg(short, default_value_t = 1)]
        f: u32,
    },
    /// Randomized fault campaign.
    Campaign {
        #[arg(long)]
        preset: Preset,
        #[arg(long, value_parser = parse_kind)]
        kind: CampaignKind,
        #[arg(long, default_value_t = 200)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
    },
}

fn parse_standard(s: &str) -> Result<Standard, String> {
    Standard::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("expected one of leader-crash, equivocation, byzantine-executor; got `{s}`"))
}

fn parse_kind(s: &str) -> Result<CampaignKind, String> {
    match s {
        "crash" => Ok(CampaignKind::Crash),
        "byzantine" => Ok(CampaignKind::Byzantine),
        _ => Err(format!("expected crash or byzantine, got `{s}`")),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Runs a spec, writes `trace.txt` and `metrics.txt` under `out`, and
/// returns the printed report together with the overall verdict.
pub fn run_to_dir(spec: &RunSpec, out: &Path, settle: Millis) -> Result<(String, bool)> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let r = execute(spec)?;
    write(&out.join("trace.txt"), &trace_io::write_trace(&r.output.trace))?;
    write(&out.join("metrics.txt"), &report::metrics_table(&r.metrics))?;
    let safety = check_safety(&r.output.trace);
    let liveness = check_liveness(&r.output.trace, spec.script.network.stable_from(), settle);
    let s = r.output.stats;
    let mut text = format!(
        "{}\nmessages sent {} delivered {} dropped {} rejected {}\ncommitted {} of {} submitted, {} replies, view changes {}\n",
        shellft_core::sim::engine::describe(&spec.blueprint, &spec.config()),
        s.sent,
        s.delivered,
        s.dropped,
        s.rejected,
        r.metrics.committed(),
        r.metrics.submitted,
        r.metrics.replied,
        r.metrics.view_changes.len()
    );
    text.push_str(&report::safety_report(&safety));
    text.push_str(&report::liveness_report(&liveness));
    Ok((text, safety.passed() && liveness.passed()))
}

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<bool> {
    match cmd {
        Command::Tailor { shell, f, out: file, dot } => {
            let bp = tailor(&shell, f);
            write!(out, "{}", blueprint_io::report(&bp))?;
            let toml = blueprint_io::to_toml(&bp);
            match file {
                Some(p) => write(&p, &toml)?,
                None => write!(out, "\n{toml}")?,
            }
            if let Some(p) = dot {
                let graph = DependencyGraph::for_stage(bp.features.agreement_stage);
                let mut sh: std::collections::BTreeSet<_> = bp
                    .clusters
                    .iter()
                    .filter(|c| c.domain == shellft_core::tailor::FaultDomain::Shell)
                    .map(|c| c.role)
                    .collect();
                sh.extend(bp.shell_selection.iter().copied());
                write(&p, &graph.to_dot(&classify(&graph, &sh)))?;
            }
            Ok(true)
        }
        Command::Run {
            blueprint,
            preset,
            f,
            seed,
            horizon,
            fault,
            workload,
            deliveries,
            settle,
            out: dir,
        } => {
            let bp: SystemBlueprint = match (blueprint, preset) {
                (Some(p), _) => blueprint_io::from_toml(&read(&p)?)?,
                (None, Some(p)) => tailor(&p.selection(), f),
                (None, None) => bail!("either --blueprint or --preset is required"),
            };
            let mut spec = RunSpec::new(bp, seed, horizon);
            if let Some(w) = workload {
                spec.workload = w;
            }
            if let Some(p) = fault {
                spec.script = script::parse(&read(&p)?)?;
            }
            spec.record_deliveries = deliveries;
            let (text, ok) = run_to_dir(&spec, &dir, settle)?;
            write!(out, "{text}")?;
            Ok(ok)
        }
        Command::Scenario {
            name,
            preset,
            seed,
            out: dir,
        } => {
            let spec = name.spec(preset, seed);
            let (text, ok) = run_to_dir(&spec, &dir, 2000)?;
            write(&dir.join("faults.txt"), &script::render(&spec.script))?;
            write!(out, "{text}")?;
            Ok(ok)
        }
        Command::Check { trace, gst, settle } => {
            let t = trace_io::read_trace(&read(&trace)?)?;
            let gst = gst.unwrap_or(t.header.gst);
            let safety = check_safety(&t);
            let liveness = check_liveness(&t, gst, settle);
            write!(out, "{}", report::safety_report(&safety))?;
            write!(out, "{}", report::liveness_report(&liveness))?;
            Ok(safety.passed() && liveness.passed())
        }
        Command::Cost { preset, f, trials, seed } => {
            let presets: Vec<Preset> = if preset == "all" {
                Preset::ALL.to_vec()
            } else {
                vec![preset.parse()?]
            };
            write!(out, "{}", report::cost_report(&presets, f))?;
            writeln!(out)?;
            write!(out, "{}", report::exploit_report(f, trials, seed))?;
            Ok(true)
        }
        Command::CheckPatterns { f } => {
            let outcomes = report::run_pattern_suite(f);
            write!(out, "{}", report::pattern_report(&outcomes))?;
            Ok(outcomes.iter().all(|o| o.ok()))
        }
        Command::Campaign {
            preset,
            kind,
            runs,
            first_seed,
        } => {
            let r = run_campaign(preset, kind, 1, runs, first_seed);
            writeln!(out, "{}", r.line())?;
            for v in r.runs.iter().filter(|v| !v.safe || (kind == CampaignKind::Crash && !v.live)) {
                writeln!(out, "  seed {} safe={} live={}: {}", v.seed, v.safe, v.live, v.summary)?;
            }
            Ok(r.passed())
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli.command, &mut lock) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            drop(lock);
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
