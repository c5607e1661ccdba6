//! Blueprint files (TOML) and the human-readable tailoring report.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use shellft_core::tailor::blueprint::BLUEPRINT_VERSION;
use shellft_core::tailor::{cost_of_blueprint, SystemBlueprint};

pub fn to_toml(bp: &SystemBlueprint) -> String {
    toml::to_string_pretty(bp).expect("blueprints serialize")
}

pub fn from_toml(text: &str) -> Result<SystemBlueprint> {
    let bp: SystemBlueprint = toml::from_str(text).context("malformed blueprint")?;
    if bp.version != BLUEPRINT_VERSION {
        bail!("blueprint version {} is not supported (expected {BLUEPRINT_VERSION})", bp.version);
    }
    bp.validate()?;
    Ok(bp)
}

/// Cluster table, fault domains, raised thresholds and machine placement.
pub fn report(bp: &SystemBlueprint) -> String {
    let mut out = String::new();
    let sel: Vec<&str> = bp.shell_selection.iter().map(|r| r.name()).collect();
    writeln!(out, "shell selection: [{}]  f={}", sel.join(","), bp.f).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{:<18} {:>5} {:>7}  {:<7} replacement", "cluster", "size", "formula", "domain").unwrap();
    for c in &bp.clusters {
        writeln!(
            out,
            "{:<18} {:>5} {:>7}  {:<7} {}",
            c.role.name(),
            c.size,
            c.formula.to_string(),
            c.domain.name(),
            c.replacement
        )
        .unwrap();
    }
    let raised: Vec<_> = bp.inputs.iter().filter(|i| i.threshold != i.base).collect();
    if !raised.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "raised thresholds:").unwrap();
        for i in raised {
            writeln!(
                out,
                "  {} -{}-> {}: {} -> {} ({})",
                i.producer.name(),
                i.kind,
                i.consumer.name(),
                i.base,
                i.threshold,
                i.value
            )
            .unwrap();
        }
    }
    writeln!(out).unwrap();
    writeln!(out, "deployment: {} machines", bp.deployment.machine_count()).unwrap();
    for g in &bp.deployment.groups {
        writeln!(out, "  group {} ({} machines)", g.name, g.machines.len()).unwrap();
        for m in &g.machines {
            let rs: Vec<String> = m.replicas.iter().map(|r| r.to_string()).collect();
            writeln!(out, "    machine {}: {}", m.id, rs.join(" ")).unwrap();
        }
    }
    let cost = cost_of_blueprint(bp);
    writeln!(out).unwrap();
    writeln!(
        out,
        "replicas: total {} = {}, shell {} = {}, shell {}% of the baseline total",
        cost.total, cost.total_at_f, cost.shell, cost.shell_at_f, cost.percent
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use shellft_core::tailor::{tailor, Preset};

    #[test]
    fn blueprints_round_trip_through_toml() {
        for p in Preset::ALL {
            for f in 0..3 {
                let bp = tailor(&p.selection(), f);
                let text = to_toml(&bp);
                assert_eq!(from_toml(&text).unwrap(), bp);
            }
        }
    }

    #[test]
    fn wrong_version_is_refused() {
        let bp = tailor(&Preset::Minas.selection(), 1);
        let text = to_toml(&bp).replacen("version = 1", "version = 99", 1);
        assert!(from_toml(&text).is_err());
    }
}
