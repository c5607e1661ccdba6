use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::faults::FaultKind;
use crate::command::{CommandId, Digest};
use crate::envelope::MessageKind;
use crate::ids::{ClusterRole, Coordinates, Millis, ReplicaId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Fault { kind: FaultKind },
    Submit { id: CommandId, client_low: u64, payload: Arc<[u8]> },
    Deliver { from: ReplicaId, kind: MessageKind, coords: Option<Coordinates> },
    Accept { id: CommandId },
    Commit { view: u64, seq: u64, digest: Digest, id: Option<CommandId> },
    Execute { seq: u64, id: Option<CommandId>, reply: Option<Digest>, duplicate: bool },
    Checkpoint { seq: u64, digest: Digest, installed: bool },
    ViewAnnounce { view: u64 },
    ViewAdopt { view: u64 },
    NewView { view: u64, start: u64, end: u64 },
    Decide { view: u64, digest: Digest },
    Reject { view: u64 },
    /// A client accepted a result.
    Reply { id: CommandId, digest: Digest },
    Alarm { what: String, seq: u64 },
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Fault { .. } => "fault",
            TraceEvent::Submit { .. } => "submit",
            TraceEvent::Deliver { .. } => "deliver",
            TraceEvent::Accept { .. } => "accept",
            TraceEvent::Commit { .. } => "commit",
            TraceEvent::Execute { .. } => "execute",
            TraceEvent::Checkpoint { .. } => "checkpoint",
            TraceEvent::ViewAnnounce { .. } => "view-announce",
            TraceEvent::ViewAdopt { .. } => "view-adopt",
            TraceEvent::NewView { .. } => "new-view",
            TraceEvent::Decide { .. } => "decide",
            TraceEvent::Reject { .. } => "reject",
            TraceEvent::Reply { .. } => "reply",
            TraceEvent::Alarm { .. } => "alarm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Millis,
    pub node: ReplicaId,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceHeader {
    pub shell: String,
    pub f: u32,
    pub seed: u64,
    pub horizon: Millis,
    pub gst: Millis,
    pub clients: u32,
    pub executors: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

/// Which replicas deviated from the protocol, as recorded in the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultSummary {
    pub crashed: BTreeMap<ReplicaId, Millis>,
    pub byzantine: BTreeSet<ReplicaId>,
}

impl FaultSummary {
    /// Correct replicas for safety: everyone who never deviated, crashed
    /// replicas included.
    pub fn honest(&self, r: ReplicaId) -> bool {
        !self.byzantine.contains(&r)
    }

    /// Replicas expected to make progress until the end.
    pub fn live(&self, r: ReplicaId) -> bool {
        self.honest(r) && !self.crashed.contains_key(&r)
    }
}

impl SimTrace {
    pub fn faults(&self) -> FaultSummary {
        let mut s = FaultSummary::default();
        for r in &self.records {
            if let TraceEvent::Fault { kind } = r.event {
                if kind == FaultKind::Crash {
                    s.crashed.entry(r.node).or_insert(r.time);
                } else {
                    s.byzantine.insert(r.node);
                }
            }
        }
        s
    }

    pub fn of_role(&self, role: ClusterRole) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.node.cluster == role)
    }

    /// Highest view any proposer moved to.
    pub fn final_view(&self) -> u64 {
        self.of_role(ClusterRole::Proposer)
            .filter_map(|r| match r.event {
                TraceEvent::ViewAdopt { view } => Some(view),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}
