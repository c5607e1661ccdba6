use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::tailor::{FaultDomain, SystemBlueprint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    Crash,
    EquivocateProposals,
    ForgeReply,
    ForgeCheckpoint,
    ForgeViewChangeReport,
    ArbitraryBytes,
}

impl FaultKind {
    pub const ALL: [FaultKind; 6] = [
        FaultKind::Crash,
        FaultKind::EquivocateProposals,
        FaultKind::ForgeReply,
        FaultKind::ForgeCheckpoint,
        FaultKind::ForgeViewChangeReport,
        FaultKind::ArbitraryBytes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::Crash => "crash",
            FaultKind::EquivocateProposals => "equivocate-proposals",
            FaultKind::ForgeReply => "forge-reply",
            FaultKind::ForgeCheckpoint => "forge-checkpoint",
            FaultKind::ForgeViewChangeReport => "forge-view-change-report",
            FaultKind::ArbitraryBytes => "arbitrary-bytes",
        }
    }

    pub fn is_byzantine(self) -> bool {
        self != FaultKind::Crash
    }

    /// Roles the behavior makes sense for.
    pub fn applies_to(self, role: ClusterRole) -> bool {
        use ClusterRole::*;
        match self {
            FaultKind::Crash | FaultKind::ArbitraryBytes => role != Client,
            FaultKind::EquivocateProposals => matches!(role, Proposer | Curator),
            FaultKind::ForgeReply | FaultKind::ForgeCheckpoint => role == Executor,
            FaultKind::ForgeViewChangeReport => matches!(role, Committer | Conservator),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fault kind `{0}`")]
pub struct UnknownFault(pub alloc::string::String);

impl FromStr for FaultKind {
    type Err = UnknownFault;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| UnknownFault(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Replica(ReplicaId),
    /// Every replica deployed on the machine.
    Machine(u16),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Replica(r) => r.fmt(f),
            Target::Machine(m) => write!(f, "machine/{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEntry {
    pub at: Millis,
    pub target: Target,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FaultScript {
    pub entries: Vec<FaultEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("{0} is not part of the system")]
    UnknownTarget(Target),
    #[error("{kind} cannot be applied to {target}")]
    Inapplicable { kind: FaultKind, target: Target },
}

impl FaultScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, at: Millis, target: Target, kind: FaultKind) -> Self {
        self.entries.push(FaultEntry { at, target, kind });
        self
    }

    /// Replicas an entry affects.
    pub fn replicas_of(target: Target, bp: &SystemBlueprint) -> Vec<ReplicaId> {
        match target {
            Target::Replica(r) => alloc::vec![r],
            Target::Machine(m) => bp
                .deployment
                .groups
                .iter()
                .flat_map(|g| &g.machines)
                .filter(|x| x.id == m)
                .flat_map(|x| x.replicas.iter().copied())
                .collect(),
        }
    }

    pub fn validate(&self, bp: &SystemBlueprint) -> Result<(), FaultError> {
        for e in &self.entries {
            let known = match e.target {
                Target::Replica(r) => r.index < bp.size(r.cluster),
                Target::Machine(m) => bp.deployment.machine_count() > usize::from(m),
            };
            if !known {
                return Err(FaultError::UnknownTarget(e.target));
            }
            let ok = match e.target {
                Target::Replica(r) => e.kind.applies_to(r.cluster),
                Target::Machine(_) => e.kind == FaultKind::Crash,
            };
            if !ok {
                return Err(FaultError::Inapplicable {
                    kind: e.kind,
                    target: e.target,
                });
            }
        }
        Ok(())
    }

    /// Faulty replicas per cluster, Byzantine ones separately.
    pub fn faulty(&self, bp: &SystemBlueprint) -> (BTreeSet<ReplicaId>, BTreeSet<ReplicaId>) {
        let mut any = BTreeSet::new();
        let mut byzantine = BTreeSet::new();
        for e in &self.entries {
            for r in Self::replicas_of(e.target, bp) {
                any.insert(r);
                if e.kind.is_byzantine() {
                    byzantine.insert(r);
                }
            }
        }
        (any, byzantine)
    }

    /// At most f faulty replicas per cluster, and Byzantine behavior only
    /// inside the shell.
    pub fn within_model(&self, bp: &SystemBlueprint) -> bool {
        let (any, byzantine) = self.faulty(bp);
        let mut per: BTreeMap<ClusterRole, u32> = BTreeMap::new();
        for r in &any {
            *per.entry(r.cluster).or_default() += 1;
        }
        per.values().all(|n| *n <= bp.f)
            && byzantine
                .iter()
                .all(|r| bp.domain(r.cluster) == Some(FaultDomain::Shell))
    }
}
