//! Plain-text reports: metrics tables, replica costs, exploit resilience and
//! the pattern property suite.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shellft_core::patterns::{Checker, PatternInstance, Property, Verdict};
use shellft_core::sim::{LivenessVerdict, Metrics, SafetyVerdict};
use shellft_core::tailor::cost::{cost_of_preset, CostReport};
use shellft_core::tailor::{tailor, DeploymentModel, Preset};

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

/// Summary lines (prefixed with `#`) followed by one row per 100 ms bucket.
pub fn metrics_table(m: &Metrics) -> String {
    let mut out = String::new();
    writeln!(out, "# submitted {} committed {} replied {}", m.submitted, m.committed(), m.replied).unwrap();
    writeln!(
        out,
        "# latency_ms mean {} p50 {} p99 {}",
        opt(m.mean_latency().map(|l| format!("{l:.1}"))),
        opt(m.latency_percentile(50.0)),
        opt(m.latency_percentile(99.0))
    )
    .unwrap();
    writeln!(out, "# view_changes {}", m.view_changes.len()).unwrap();
    for v in &m.view_changes {
        writeln!(
            out,
            "# view {} announced {} adopted {} duration_ms {}",
            v.view,
            v.announced,
            opt(v.adopted),
            opt(v.duration())
        )
        .unwrap();
    }
    let per_second: Vec<String> = m.per_second().iter().map(|n| n.to_string()).collect();
    writeln!(out, "# per_second {}", per_second.join(" ")).unwrap();
    writeln!(out, "time_ms committed mean_latency_ms").unwrap();
    for b in &m.buckets {
        writeln!(
            out,
            "{} {} {}",
            b.start,
            b.committed,
            opt(b.mean_latency.map(|l| format!("{l:.1}")))
        )
        .unwrap();
    }
    out
}

pub fn safety_report(v: &SafetyVerdict) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "safety: {} (oracle slots {}, verified replies {}, divergences {}, bad checkpoints {}, bad executor replies {}, incorrect client replies {})",
        if v.passed() { "PASS" } else { "FAIL" },
        v.oracle_slots,
        v.verified_replies,
        v.divergences,
        v.bad_checkpoints,
        v.bad_executor_replies,
        v.incorrect_replies
    )
    .unwrap();
    for x in &v.violations {
        writeln!(out, "  {x}").unwrap();
    }
    out
}

pub fn liveness_report(v: &LivenessVerdict) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "liveness: {} (obligations {}, missing {})",
        if v.passed() { "PASS" } else { "FAIL" },
        v.obligations,
        v.missing_count
    )
    .unwrap();
    for (id, e) in &v.missing {
        writeln!(out, "  {}:{} not executed by {e}", id.client, id.counter).unwrap();
    }
    out
}

fn cost_row(out: &mut String, name: &str, c: &CostReport) {
    writeln!(
        out,
        "{:<14} {:>7} {:>6} {:>6} {:>6} {:>6}% {:>6}%",
        name,
        c.total.to_string(),
        c.shell.to_string(),
        c.total_at_f,
        c.shell_at_f,
        c.percent,
        c.limit_percent
    )
    .unwrap();
}

/// Replica counts per preset, as published and as produced by tailoring.
pub fn cost_report(presets: &[Preset], f: u32) -> String {
    let mut out = String::new();
    writeln!(out, "replica cost at f={f} (percent: shell share, limit: f -> infinity)").unwrap();
    writeln!(
        out,
        "{:<14} {:>7} {:>6} {:>6} {:>6} {:>7} {:>7}",
        "preset", "total", "shell", "total", "shell", "percent", "limit"
    )
    .unwrap();
    for p in presets {
        cost_row(&mut out, p.name(), &cost_of_preset(*p, f));
    }
    writeln!(out).unwrap();
    writeln!(out, "per-cluster sizes").unwrap();
    for p in presets {
        let c = cost_of_preset(*p, f);
        let cells: Vec<String> = c
            .clusters
            .iter()
            .map(|x| format!("{}={}{}", x.role.name(), x.size, if x.shell { "*" } else { "" }))
            .collect();
        writeln!(out, "  {:<14} {}", p.name(), cells.join(" ")).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "tailored blueprints").unwrap();
    for p in presets.iter().filter(|p| **p != Preset::Hybrid) {
        let c = shellft_core::tailor::cost_of_blueprint(&tailor(&p.selection(), f));
        cost_row(&mut out, p.name(), &c);
    }
    out
}

/// Probability of a system-wide failure after `k` successful exploits.
pub fn exploit_report(f: u32, trials: u64, seed: u64) -> String {
    let mut out = String::new();
    let minas = DeploymentModel::from_blueprint(&tailor(&Preset::Minas.selection(), f));
    let rows = [
        ("monolithic", DeploymentModel::monolithic(f)),
        ("group-based", minas),
        ("fully-diversified", DeploymentModel::fully_diversified(f)),
    ];
    writeln!(out, "system-wide failure probability at f={f} ({trials} Monte Carlo trials per cell)").unwrap();
    writeln!(out, "{:<18} {:>2} {:>12} {:>9} {:>9}", "deployment", "k", "exact", "exact%", "sampled%").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, model) in rows {
        for k in 1..=5u32.min(model.targets()) {
            let exact = model.exact(k);
            let mc = model.monte_carlo(k, trials, &mut rng);
            writeln!(
                out,
                "{:<18} {:>2} {:>12} {:>8.1}% {:>8.1}%",
                name,
                k,
                exact.to_string(),
                exact.to_f64() * 100.0,
                mc * 100.0
            )
            .unwrap();
        }
    }
    out
}

/// The instances the property suite checks, with the property each must
/// satisfy. The last entry is the control case that must fail.
pub fn pattern_suite(f: u32) -> Vec<(&'static str, PatternInstance, Checker, bool)> {
    let plain = Checker::default();
    let equivocating = Checker {
        cft_equivocation: true,
        ..Checker::default()
    };
    vec![
        ("rdp-cft", PatternInstance::rdp_cft(f, 2), plain, true),
        ("rdp-bft", PatternInstance::rdp_bft(f, 2), plain, true),
        ("relay-cft", PatternInstance::relay_cft(f, 2), plain, true),
        ("relay-bft", PatternInstance::relay_bft(f, 2), plain, true),
        ("control: rdp-cft with equivocating source", PatternInstance::rdp_cft(f, 2), equivocating, false),
    ]
}

pub struct PatternOutcome {
    pub name: &'static str,
    pub verdict: Result<Verdict, shellft_core::patterns::ExplosionGuard>,
    pub expect_pass: bool,
}

impl PatternOutcome {
    pub fn ok(&self) -> bool {
        match &self.verdict {
            Ok(v) if self.expect_pass => v.passed(),
            Ok(v) => v.violations_of(Property::Rdp1) > 0,
            Err(_) => false,
        }
    }
}

pub fn run_pattern_suite(f: u32) -> Vec<PatternOutcome> {
    pattern_suite(f)
        .into_iter()
        .map(|(name, inst, checker, expect_pass)| PatternOutcome {
            name,
            verdict: checker.check(&inst),
            expect_pass,
        })
        .collect()
}

pub fn pattern_report(outcomes: &[PatternOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let expectation = if o.expect_pass { "expect no counterexample" } else { "expect RDP.1 counterexample" };
        writeln!(out, "[{}] {} ({expectation})", if o.ok() { "ok" } else { "FAILED" }, o.name).unwrap();
        match &o.verdict {
            Ok(v) => {
                for line in v.to_string().lines() {
                    writeln!(out, "    {line}").unwrap();
                }
            }
            Err(e) => writeln!(out, "    {e}").unwrap(),
        }
    }
    out
}
