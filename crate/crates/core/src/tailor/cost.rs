//! Functionality-diversification cost: how many micro replicas need
//! diversified implementations, relative to the baseline protocol.

use alloc::vec::Vec;

use serde::Serialize;

use super::{FaultDomain, Preset, SystemBlueprint};
use crate::ids::ClusterRole;
use crate::linear::Linear;

/// Reference total every percentage is relative to: eight clusters of 2f+1.
pub const BASELINE: Linear = Linear::new(16, 8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClusterCost {
    pub role: ClusterRole,
    pub size: Linear,
    pub shell: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub name: &'static str,
    pub f: u32,
    pub clusters: Vec<ClusterCost>,
    pub total: Linear,
    pub shell: Linear,
    pub total_at_f: u64,
    pub shell_at_f: u64,
    /// Shell replicas relative to the baseline total, rounded.
    pub percent: u64,
    /// The same ratio as f grows without bound.
    pub limit_percent: u64,
}

/// `100 * num / den`, rounded half up.
pub fn percent(num: u64, den: u64) -> u64 {
    assert!(den > 0, "zero denominator");
    (200 * num + den) / (2 * den)
}

/// Ratio of the leading coefficients, falling back to the constants when
/// neither depends on f.
pub fn limit_percent(num: Linear, den: Linear) -> u64 {
    if den.a == 0 {
        percent(u64::from(num.b), u64::from(den.b))
    } else {
        percent(u64::from(num.a), u64::from(den.a))
    }
}

fn report(name: &'static str, f: u32, clusters: Vec<ClusterCost>) -> CostReport {
    let total: Linear = clusters.iter().map(|c| c.size).sum();
    let shell: Linear = clusters.iter().filter(|c| c.shell).map(|c| c.size).sum();
    CostReport {
        name,
        f,
        total,
        shell,
        total_at_f: total.eval(f),
        shell_at_f: shell.eval(f),
        percent: percent(shell.eval(f), BASELINE.eval(f)),
        limit_percent: limit_percent(shell, BASELINE),
        clusters,
    }
}

/// Per-cluster columns of the reference cost table.
pub fn column(preset: Preset) -> Vec<ClusterCost> {
    use ClusterRole::*;
    let l = Linear::new;
    let (f1, f2, f3) = (l(1, 1), l(2, 1), l(3, 1));
    let rows: &[(ClusterRole, Linear, bool)] = match preset {
        Preset::Base => &[
            (FrontEnd, f2, false),
            (Proposer, f2, false),
            (Committer, f2, false),
            (Executor, f2, false),
            (Controller, f2, false),
            (ViewMonitor, f2, false),
            (AgreementMonitor, f2, false),
            (CompletionMonitor, f2, false),
        ],
        Preset::Hybrid => &[
            (FrontEnd, f2, true),
            (Proposer, f2, true),
            (Committer, f2, true),
            (Executor, f2, true),
            (Controller, f2, true),
            (ViewMonitor, f2, true),
            (AgreementMonitor, f2, true),
            (CompletionMonitor, f2, true),
        ],
        Preset::Mirador => &[
            (FrontEnd, f2, true),
            (Proposer, f1, true),
            (Preparer, f3, true),
            (Committer, f3, true),
            (Executor, f3, true),
            (Controller, f2, true),
            (ViewMonitor, f3, true),
            (Conservator, f3, true),
            (Curator, f1, true),
            (Auditor, f3, true),
            (RecordKeeper, f3, true),
            (AgreementMonitor, f3, true),
            (CompletionMonitor, f3, true),
        ],
        Preset::Minas => &[
            (FrontEnd, f2, true),
            (Proposer, f1, false),
            (Committer, f2, false),
            (Executor, f3, true),
            (Controller, f2, false),
            (ViewMonitor, f2, false),
            (AgreementMonitor, f2, false),
            (CompletionMonitor, f2, false),
        ],
        Preset::Sentry => &[
            (FrontEnd, f2, false),
            (Proposer, f1, true),
            (Preparer, f3, false),
            (Committer, f2, false),
            (Executor, f3, true),
            (Controller, f2, false),
            (ViewMonitor, f2, false),
            (Conservator, f2, false),
            (Curator, f1, true),
            (Auditor, f3, false),
            (RecordKeeper, f2, false),
            (AgreementMonitor, f2, false),
            (CompletionMonitor, f2, false),
        ],
        Preset::MinasSentry => &[
            (FrontEnd, f2, true),
            (Proposer, f1, true),
            (Preparer, f3, false),
            (Committer, f2, false),
            (Executor, f3, true),
            (Controller, f2, false),
            (ViewMonitor, f2, false),
            (Conservator, f2, false),
            (Curator, f1, true),
            (Auditor, f3, false),
            (RecordKeeper, f2, false),
            (AgreementMonitor, f2, false),
            (CompletionMonitor, f2, false),
        ],
    };
    rows.iter()
        .map(|&(role, size, shell)| ClusterCost { role, size, shell })
        .collect()
}

pub fn cost_of_preset(preset: Preset, f: u32) -> CostReport {
    report(preset.name(), f, column(preset))
}

/// Cost of a tailored blueprint; clients are not counted.
pub fn cost_of_blueprint(bp: &SystemBlueprint) -> CostReport {
    let clusters = bp
        .clusters
        .iter()
        .map(|c| ClusterCost {
            role: c.role,
            size: c.formula,
            shell: c.domain == FaultDomain::Shell,
        })
        .collect();
    report("tailored", bp.f, clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailor::tailor;
    use alloc::collections::BTreeMap;

    #[test]
    fn reference_cells() {
        let want: [(Preset, (u32, u32), (u32, u32), u64, u64); 6] = [
            (Preset::Base, (16, 8), (0, 0), 0, 0),
            (Preset::Hybrid, (16, 8), (16, 8), 100, 100),
            (Preset::Mirador, (33, 13), (33, 13), 192, 206),
            (Preset::Minas, (16, 8), (5, 2), 29, 31),
            (Preset::Sentry, (27, 13), (5, 3), 33, 31),
            (Preset::MinasSentry, (27, 13), (7, 4), 46, 44),
        ];
        for (p, (ta, tb), (sa, sb), pct, lim) in want {
            let r = cost_of_preset(p, 1);
            assert_eq!(r.total, Linear::new(ta, tb), "{p}");
            assert_eq!(r.shell, Linear::new(sa, sb), "{p}");
            assert_eq!((r.percent, r.limit_percent), (pct, lim), "{p}");
        }
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(7, 24), 29);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(5, 16), 31);
        assert_eq!(percent(0, 3), 0);
    }

    #[test]
    fn tailored_presets_match_reference_columns() {
        for p in [Preset::Minas, Preset::Sentry, Preset::MinasSentry] {
            let bp = tailor(&p.selection(), 1);
            let tailored: BTreeMap<_, _> = cost_of_blueprint(&bp)
                .clusters
                .iter()
                .map(|c| (c.role, (c.size, c.shell)))
                .collect();
            let reference: BTreeMap<_, _> = column(p).iter().map(|c| (c.role, (c.size, c.shell))).collect();
            assert_eq!(tailored, reference, "{p}");
        }
    }

    #[test]
    fn tailored_base_uses_small_proposer_cluster() {
        let r = cost_of_blueprint(&tailor(&Preset::Base.selection(), 1));
        assert_eq!(r.total, Linear::new(15, 8));
        assert_eq!(r.shell, Linear::ZERO);
    }
}
