//! Simulation runs: a blueprint, a workload and a fault script, plus the
//! three standard fault scenarios.

use anyhow::Result;
use shellft_core::protocol::Timing;
use shellft_core::sim::{self, FaultKind, FaultScript, Metrics, Partition, SimConfig, SimOutput, Target};
use shellft_core::tailor::{tailor, Preset, SystemBlueprint};
use shellft_core::{ClusterRole, Millis, ReplicaId};

use crate::script::ScriptFile;
use crate::workload::WorkloadSpec;

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub blueprint: SystemBlueprint,
    pub workload: WorkloadSpec,
    pub script: ScriptFile,
    pub seed: u64,
    pub horizon: Millis,
    pub timing: Timing,
    pub record_deliveries: bool,
}

impl RunSpec {
    pub fn new(blueprint: SystemBlueprint, seed: u64, horizon: Millis) -> Self {
        RunSpec {
            blueprint,
            workload: WorkloadSpec {
                seed,
                ..WorkloadSpec::default()
            },
            script: ScriptFile::default(),
            seed,
            horizon,
            timing: Timing::default(),
            record_deliveries: false,
        }
    }

    pub fn config(&self) -> SimConfig {
        SimConfig {
            network: self.script.network.clone(),
            faults: self.script.faults.clone(),
            seed: self.seed,
            horizon: self.horizon,
            timing: self.timing,
            record_deliveries: self.record_deliveries,
        }
    }
}

pub struct RunResult {
    pub output: SimOutput,
    pub metrics: Metrics,
}

pub fn execute(spec: &RunSpec) -> Result<RunResult> {
    let workload = spec.workload.generate(spec.horizon);
    let output = sim::run(&spec.blueprint, &workload, &spec.config())?;
    let metrics = Metrics::from_trace(&output.trace);
    Ok(RunResult { output, metrics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Standard {
    /// The leading proposer crashes at 2 s.
    LeaderCrash,
    /// The leading proposer equivocates from 2 s on.
    Equivocation,
    /// One executor forges replies and checkpoints from 1 s on; another
    /// executor's machine is cut off between 3 s and 4.5 s and has to catch
    /// up from checkpoints.
    ByzantineExecutor,
}

impl Standard {
    pub const ALL: [Standard; 3] = [Standard::LeaderCrash, Standard::Equivocation, Standard::ByzantineExecutor];

    pub fn name(self) -> &'static str {
        match self {
            Standard::LeaderCrash => "leader-crash",
            Standard::Equivocation => "equivocation",
            Standard::ByzantineExecutor => "byzantine-executor",
        }
    }

    pub const FAULT_AT: Millis = 2000;
    pub const HORIZON: Millis = 10_000;

    pub fn spec(self, preset: Preset, seed: u64) -> RunSpec {
        let bp = tailor(&preset.selection(), 1);
        let mut spec = RunSpec::new(bp, seed, Self::HORIZON);
        let replica = |c, i| Target::Replica(ReplicaId::new(c, i));
        let mut faults = FaultScript::new();
        match self {
            Standard::LeaderCrash => {
                faults = faults.with(Self::FAULT_AT, replica(ClusterRole::Proposer, 0), FaultKind::Crash);
            }
            Standard::Equivocation => {
                faults = faults.with(
                    Self::FAULT_AT,
                    replica(ClusterRole::Proposer, 0),
                    FaultKind::EquivocateProposals,
                );
            }
            Standard::ByzantineExecutor => {
                let forger = replica(ClusterRole::Executor, 1);
                faults = faults
                    .with(1000, forger, FaultKind::ForgeReply)
                    .with(1000, forger, FaultKind::ForgeCheckpoint);
                let lagging = ReplicaId::new(ClusterRole::Executor, 2);
                if let Some(m) = spec.blueprint.deployment.machine_of(lagging) {
                    spec.script.network.partitions.push(Partition {
                        from: 3000,
                        until: 4500,
                        side: [m].into_iter().collect(),
                    });
                }
            }
        }
        spec.script.faults = faults;
        spec
    }
}
