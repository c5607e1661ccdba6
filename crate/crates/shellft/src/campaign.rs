//! Randomized fault campaigns: many seeded runs per preset, checked in
//! parallel.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shellft_core::sim::{check_liveness, check_safety, FaultKind, FaultScript, NetworkModel, Partition, Target};
use shellft_core::tailor::{FaultDomain, Preset, SystemBlueprint};
use shellft_core::{ClusterRole, Millis, ReplicaId};

use crate::scenario::{execute, RunSpec};
use crate::script::ScriptFile;
use crate::workload::WorkloadSpec;

pub const HORIZON: Millis = 15_000;
/// Faults strike before this time. Three successive failed views with
/// doubling timeouts take 7 s, which still leaves room before the horizon.
pub const LAST_FAULT: Millis = 5000;
/// Time the system gets after the last obligation.
pub const SETTLE: Millis = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    /// Crashes anywhere, at most f per cluster, over a lossy network that
    /// stabilizes at a random time.
    Crash,
    /// Byzantine behavior confined to the preset's shell clusters, plus
    /// crashes elsewhere.
    Byzantine,
}

impl CampaignKind {
    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::Crash => "crash",
            CampaignKind::Byzantine => "byzantine",
        }
    }
}

fn random_network(rng: &mut ChaCha8Rng, bp: &SystemBlueprint) -> NetworkModel {
    let mut net = NetworkModel {
        gst: rng.random_range(0..=3000),
        ..NetworkModel::default()
    };
    if net.gst > 0 {
        net.drop_ppm = rng.random_range(0..=50_000);
        net.reorder_window = rng.random_range(0..=20);
        if rng.random_bool(0.3) {
            let m = rng.random_range(0..bp.deployment.machine_count()) as u16;
            let from = rng.random_range(0..net.gst);
            let until = (from + rng.random_range(100..=1000)).min(net.gst.max(from + 1));
            net.partitions.push(Partition {
                from,
                until,
                side: [m].into_iter().collect(),
            });
        }
    }
    net
}

fn clusters(bp: &SystemBlueprint) -> Vec<(ClusterRole, u16, FaultDomain)> {
    bp.clusters.iter().map(|c| (c.role, c.size, c.domain)).collect()
}

/// A within-model fault script for one campaign run.
pub fn random_script(kind: CampaignKind, bp: &SystemBlueprint, seed: u64) -> ScriptFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6361_6d70_6169_676e);
    let network = random_network(&mut rng, bp);
    let mut faults = FaultScript::new();
    let mut used: Vec<ClusterRole> = Vec::new();
    let f = bp.f as usize;

    if kind == CampaignKind::Byzantine {
        let shell: Vec<_> = clusters(bp).into_iter().filter(|c| c.2 == FaultDomain::Shell).collect();
        let forced = if shell.is_empty() { usize::MAX } else { rng.random_range(0..shell.len()) };
        for (i, (role, size, _)) in shell.iter().enumerate() {
            if i != forced && !rng.random_bool(0.5) {
                continue;
            }
            let kinds: Vec<FaultKind> = FaultKind::ALL
                .into_iter()
                .filter(|k| k.is_byzantine() && k.applies_to(*role))
                .collect();
            let idx = rng.random_range(0..*size);
            let target = Target::Replica(ReplicaId::new(*role, idx));
            let at = rng.random_range(0..LAST_FAULT);
            let first = *kinds.choose(&mut rng).expect("arbitrary bytes applies everywhere");
            faults = faults.with(at, target, first);
            if rng.random_bool(0.3) {
                let second = *kinds.choose(&mut rng).expect("non-empty");
                faults = faults.with(at + rng.random_range(0..1000), target, second);
            }
            used.push(*role);
        }
    } else if f > 0 && rng.random_bool(0.2) {
        let m = rng.random_range(0..bp.deployment.machine_count()) as u16;
        faults = faults.with(rng.random_range(500..LAST_FAULT), Target::Machine(m), FaultKind::Crash);
        used.extend(FaultScript::replicas_of(Target::Machine(m), bp).iter().map(|r| r.cluster));
    }

    if f > 0 {
        for (role, size, _) in clusters(bp) {
            if used.contains(&role) || !rng.random_bool(0.25) {
                continue;
            }
            let idx = rng.random_range(0..size);
            faults = faults.with(
                rng.random_range(500..LAST_FAULT),
                Target::Replica(ReplicaId::new(role, idx)),
                FaultKind::Crash,
            );
        }
    }
    debug_assert!(faults.within_model(bp));
    ScriptFile { faults, network }
}

pub fn campaign_spec(kind: CampaignKind, bp: &SystemBlueprint, seed: u64) -> RunSpec {
    let mut spec = RunSpec::new(bp.clone(), seed, HORIZON);
    spec.workload = WorkloadSpec {
        clients: 3,
        rate: 100.0,
        seed,
        ..WorkloadSpec::default()
    };
    spec.script = random_script(kind, bp, seed);
    spec
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunVerdict {
    pub seed: u64,
    pub safe: bool,
    pub live: bool,
    pub committed: u64,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignResult {
    pub preset: Preset,
    pub kind: CampaignKind,
    pub runs: Vec<RunVerdict>,
}

impl CampaignResult {
    pub fn safety_failures(&self) -> impl Iterator<Item = &RunVerdict> {
        self.runs.iter().filter(|r| !r.safe)
    }

    pub fn liveness_failures(&self) -> impl Iterator<Item = &RunVerdict> {
        self.runs.iter().filter(|r| !r.live)
    }

    /// Crash campaigns must be safe and live, Byzantine ones safe.
    pub fn passed(&self) -> bool {
        match self.kind {
            CampaignKind::Crash => self.runs.iter().all(|r| r.safe && r.live),
            CampaignKind::Byzantine => self.runs.iter().all(|r| r.safe),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<13} {:<9} runs {:>4}  safe {:>4}  live {:>4}",
            self.preset.name(),
            self.kind.name(),
            self.runs.len(),
            self.runs.iter().filter(|r| r.safe).count(),
            self.runs.iter().filter(|r| r.live).count()
        )
    }
}

pub fn run_one(kind: CampaignKind, bp: &SystemBlueprint, seed: u64) -> RunVerdict {
    let spec = campaign_spec(kind, bp, seed);
    match execute(&spec) {
        Ok(r) => {
            let safety = check_safety(&r.output.trace);
            let liveness = check_liveness(&r.output.trace, spec.script.network.stable_from(), SETTLE);
            let mut summary = crate::script::render(&spec.script).replace('\n', "; ");
            if let Some(v) = safety.violations.first() {
                summary.push_str(&format!(" | {v}"));
            }
            if let Some((id, e)) = liveness.missing.first() {
                summary.push_str(&format!(" | {id} missing at {e}"));
            }
            RunVerdict {
                seed,
                safe: safety.passed(),
                live: liveness.passed(),
                committed: r.metrics.committed(),
                summary,
            }
        }
        Err(e) => RunVerdict {
            seed,
            safe: false,
            live: false,
            committed: 0,
            summary: format!("run failed: {e}"),
        },
    }
}

pub fn run_campaign(preset: Preset, kind: CampaignKind, f: u32, runs: u64, first_seed: u64) -> CampaignResult {
    let bp = shellft_core::tailor::tailor(&preset.selection(), f);
    let runs = (first_seed..first_seed + runs)
        .into_par_iter()
        .map(|seed| run_one(kind, &bp, seed))
        .collect();
    CampaignResult { preset, kind, runs }
}
