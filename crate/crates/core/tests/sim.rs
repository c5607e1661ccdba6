use std::sync::Arc;

use shellft_core::kv::{Fields, KvCommand, KvOp};
use shellft_core::sim::{self, check_liveness, check_safety, FaultKind, FaultScript, Metrics, SimConfig, Target, WorkItem, Workload};
use shellft_core::tailor::{tailor, Preset, SystemBlueprint};
use shellft_core::{ClusterRole, ReplicaId};

fn workload(clients: u32, until: u64) -> Workload {
    let mut items = Vec::new();
    for c in 0..clients {
        let mut t = 20 + 7 * u64::from(c);
        let mut k = 0u32;
        while t < until {
            let op = if k % 2 == 0 { KvOp::Update } else { KvOp::Get };
            let mut fields = Fields::new();
            if op != KvOp::Get {
                fields.insert("f0".into(), Arc::from(format!("v{c}.{k}").as_bytes()));
            }
            let cmd = KvCommand {
                op,
                key: format!("user{}", k % 7),
                fields,
            };
            items.push(WorkItem {
                at: t,
                client: c,
                payload: Arc::from(cmd.encode()),
            });
            t += 40;
            k += 1;
        }
    }
    Workload { clients, items }
}

fn config(seed: u64, horizon: u64, faults: FaultScript) -> SimConfig {
    SimConfig {
        seed,
        horizon,
        faults,
        ..SimConfig::default()
    }
}

fn replica(c: ClusterRole, i: u16) -> Target {
    Target::Replica(ReplicaId::new(c, i))
}

fn bp(p: Preset) -> SystemBlueprint {
    tailor(&p.selection(), 1)
}

#[test]
fn fault_free_runs_execute_everything() {
    for p in [Preset::Base, Preset::Minas, Preset::Sentry, Preset::MinasSentry, Preset::Mirador] {
        let w = workload(3, 2000);
        let out = sim::run(&bp(p), &w, &config(7, 3000, FaultScript::new())).unwrap();
        let safety = check_safety(&out.trace);
        assert!(safety.passed(), "{p:?}: {:?}", safety.violations);
        let live = check_liveness(&out.trace, 0, 500);
        assert!(live.passed(), "{p:?}: {:?}", live.missing);
        let m = Metrics::from_trace(&out.trace);
        assert_eq!(m.committed(), w.items.len() as u64, "{p:?}");
        assert_eq!(m.replied, w.items.len() as u64, "{p:?}");
        assert!(safety.verified_replies > 0);
    }
}

#[test]
fn runs_are_deterministic() {
    let w = workload(2, 1500);
    let faults = FaultScript::new().with(600, replica(ClusterRole::Proposer, 0), FaultKind::Crash);
    let a = sim::run(&bp(Preset::Sentry), &w, &config(3, 2500, faults.clone())).unwrap();
    let b = sim::run(&bp(Preset::Sentry), &w, &config(3, 2500, faults.clone())).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.stats, b.stats);
    let c = sim::run(&bp(Preset::Sentry), &w, &config(4, 2500, faults)).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn leader_crash_triggers_a_view_change() {
    let w = workload(2, 3500);
    let faults = FaultScript::new().with(1000, replica(ClusterRole::Proposer, 0), FaultKind::Crash);
    let out = sim::run(&bp(Preset::Base), &w, &config(11, 5000, faults)).unwrap();
    assert!(check_safety(&out.trace).passed());
    assert!(check_liveness(&out.trace, 0, 1000).passed());
    assert!(out.trace.final_view() >= 1);
}

#[test]
fn equivocating_leader_breaks_the_base_but_not_the_shell() {
    let w = workload(3, 2500);
    let faults = FaultScript::new().with(300, replica(ClusterRole::Proposer, 0), FaultKind::EquivocateProposals);
    let base = sim::run(&bp(Preset::Base), &w, &config(5, 3500, faults.clone())).unwrap();
    assert!(!check_safety(&base.trace).passed());
    let sentry = sim::run(&bp(Preset::Sentry), &w, &config(5, 3500, faults)).unwrap();
    let v = check_safety(&sentry.trace);
    assert!(v.passed(), "{:?}", v.violations);
    assert!(check_liveness(&sentry.trace, 0, 1500).passed());
}

#[test]
fn forged_executor_outputs_are_masked_in_the_shell() {
    let w = workload(3, 2500);
    let faults = FaultScript::new()
        .with(200, replica(ClusterRole::Executor, 1), FaultKind::ForgeReply)
        .with(200, replica(ClusterRole::Executor, 1), FaultKind::ForgeCheckpoint);
    let minas = sim::run(&bp(Preset::Minas), &w, &config(9, 3500, faults.clone())).unwrap();
    let v = check_safety(&minas.trace);
    assert!(v.passed(), "{:?}", v.violations);
    assert!(check_liveness(&minas.trace, 0, 1000).passed());
    let base = sim::run(&bp(Preset::Base), &w, &config(9, 3500, faults)).unwrap();
    assert!(!check_safety(&base.trace).passed());
}

#[test]
fn losing_a_committer_majority_stalls_progress() {
    let w = workload(2, 2500);
    let faults = FaultScript::new()
        .with(500, replica(ClusterRole::Committer, 0), FaultKind::Crash)
        .with(500, replica(ClusterRole::Committer, 1), FaultKind::Crash);
    let out = sim::run(&bp(Preset::Base), &w, &config(2, 3500, faults)).unwrap();
    assert!(check_safety(&out.trace).passed());
    assert!(!check_liveness(&out.trace, 0, 500).passed());
}
