//! Small deterministic runs shared by the golden-trace checks.

use shellft::scenario::RunSpec;
use shellft::workload::WorkloadSpec;
use shellft_core::sim::{FaultKind, FaultScript, Partition, Target};
use shellft_core::tailor::{tailor, Preset};
use shellft_core::{ClusterRole, ReplicaId};

const HORIZON: u64 = 3000;

fn small(preset: Preset, seed: u64) -> RunSpec {
    let mut spec = RunSpec::new(tailor(&preset.selection(), 1), seed, HORIZON);
    spec.workload = WorkloadSpec {
        clients: 2,
        rate: 20.0,
        fields: 2,
        field_size: 8,
        seed,
        ..WorkloadSpec::default()
    };
    spec
}

fn at(role: ClusterRole, i: u16) -> Target {
    Target::Replica(ReplicaId::new(role, i))
}

pub fn golden_scenarios() -> Vec<(&'static str, RunSpec)> {
    use ClusterRole::*;
    let mut out = Vec::new();
    for (name, p) in [
        ("base-clean", Preset::Base),
        ("minas-clean", Preset::Minas),
        ("sentry-clean", Preset::Sentry),
        ("minas-sentry-clean", Preset::MinasSentry),
        ("mirador-clean", Preset::Mirador),
    ] {
        out.push((name, small(p, 7)));
    }
    let mut s = small(Preset::Base, 11);
    s.script.faults = FaultScript::new().with(800, at(Proposer, 0), FaultKind::Crash);
    out.push(("base-leader-crash", s));

    let mut s = small(Preset::Sentry, 12);
    s.script.faults = FaultScript::new().with(800, at(Proposer, 0), FaultKind::EquivocateProposals);
    out.push(("sentry-equivocation", s));

    let mut s = small(Preset::Minas, 13);
    s.script.faults = FaultScript::new()
        .with(500, at(Executor, 1), FaultKind::ForgeReply)
        .with(500, at(FrontEnd, 2), FaultKind::ArbitraryBytes);
    out.push(("minas-forgery", s));

    let mut s = small(Preset::MinasSentry, 14);
    s.script.network.gst = 1500;
    s.script.network.drop_ppm = 30_000;
    s.script.network.reorder_window = 10;
    s.script.network.partitions.push(Partition {
        from: 300,
        until: 1200,
        side: [0].into_iter().collect(),
    });
    out.push(("minas-sentry-lossy", s));

    let mut s = small(Preset::Mirador, 15);
    s.script.faults = FaultScript::new()
        .with(600, at(Curator, 0), FaultKind::ArbitraryBytes)
        .with(900, Target::Machine(1), FaultKind::Crash);
    out.push(("mirador-mixed", s));
    out
}
