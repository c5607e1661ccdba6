//! Deterministic state machines of the crash-tolerant base protocol, and the
//! shared plumbing every replica uses.

pub mod client;
pub mod committer;
pub mod controller;
pub mod executor;
pub mod flows;
pub mod frontend;
pub mod monitor;
pub mod proposer;

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::auth::Authenticator;
use crate::bft::{auditor::Auditor, conservator::Conservator, curator::Curator};
use crate::bft::{preparer::Preparer, record_keeper::RecordKeeper};
use crate::command::{CommandId, Digest};
use crate::envelope::{Body, ControlLoop, Envelope, MessageKind};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::quorum::OpinionSet;
use crate::window::WINDOW_CAPACITY;

pub use client::Client;
pub use committer::Committer;
pub use controller::Controller;
pub use executor::Executor;
pub use frontend::FrontEnd;
pub use monitor::Monitor;
pub use proposer::Proposer;

/// Timer settings, all in simulated milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub tick: Millis,
    /// Minimum age before an unconfirmed output is sent again.
    pub retransmit: Millis,
    /// Resend period for outputs the system already committed.
    pub slow_retransmit: Millis,
    /// Minimum gap between two control-loop reports.
    pub control_period: Millis,
    /// Control-loop values are re-sent at least this often.
    pub refresh: Millis,
    pub client_resend: Millis,
    pub view_timeout: Millis,
    pub view_change_retransmit: Millis,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            tick: 10,
            retransmit: 100,
            slow_retransmit: 500,
            control_period: 50,
            refresh: 500,
            client_resend: 300,
            view_timeout: 1000,
            view_change_retransmit: 200,
        }
    }
}

/// How executors match committer confirmations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitMatch {
    /// Count confirmations per slot and take the first value seen. Enough
    /// when every committer is crash-only.
    SlotOnly,
    /// Require the threshold of identical values.
    Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Features {
    /// Proposals go through preparers and view changes through the
    /// conservator/curator/auditor/record-keeper pipeline.
    pub agreement_stage: bool,
    pub commit_match: CommitMatch,
}

/// Acceptance thresholds of every aggregated input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub reply: usize,
    pub checkpoint: usize,
    pub confirm: usize,
    pub history: usize,
    pub submission: usize,
    pub source: [usize; 3],
    pub forward: [usize; 3],
    pub observer: [usize; 3],
    pub prepare: usize,
    pub evidence: usize,
    pub prepare_report: usize,
    pub basis: usize,
    pub voucher: usize,
    pub new_view: usize,
    /// Matching preparer reports needed before a conservator treats a value
    /// as prepared.
    pub prepared_support: usize,
}

impl Thresholds {
    pub fn observer(&self, c: ControlLoop) -> usize {
        self.observer[c.index()]
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub f: u32,
    pub sizes: [u16; ClusterRole::COUNT],
    pub thresholds: Thresholds,
    pub features: Features,
    pub timing: Timing,
    pub window: u64,
    pub auth: Arc<dyn Authenticator>,
    /// (producer, kind, consumer) triples replicas accept.
    pub allowed: BTreeSet<(ClusterRole, MessageKind, ClusterRole)>,
}

impl ProtocolConfig {
    pub fn size(&self, role: ClusterRole) -> u16 {
        self.sizes[role.index()]
    }

    pub fn leader(&self, view: u64) -> u16 {
        (view % u64::from(self.size(ClusterRole::Proposer).max(1))) as u16
    }

    /// Leader `i` first meets curator `i`, which machine placement puts on
    /// the same box; later rounds shift the pairing by one, so every pairing
    /// comes up within `proposers * curators` views.
    pub fn curator(&self, view: u64) -> u16 {
        let leaders = u64::from(self.size(ClusterRole::Proposer).max(1));
        ((view + view / leaders) % u64::from(self.size(ClusterRole::Curator).max(1))) as u16
    }

    pub fn proposers(&self) -> u16 {
        self.size(ClusterRole::Proposer)
    }

    pub fn accepts(&self, producer: ClusterRole, kind: MessageKind, consumer: ClusterRole) -> bool {
        self.allowed.contains(&(producer, kind, consumer))
    }

    pub fn with_window(mut self, window: u64) -> Self {
        self.window = window;
        self
    }

    pub fn default_window() -> u64 {
        WINDOW_CAPACITY
    }
}

/// Where an output goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    /// Every member of a cluster, the sender included.
    Cluster(ClusterRole),
    /// Every other member of the sender's own cluster.
    Peers,
    Replica(ReplicaId),
}

/// Observable protocol milestones, recorded into the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolEvent {
    Accepted { id: CommandId },
    Committed { view: u64, seq: u64, digest: Digest, id: Option<CommandId> },
    Executed { seq: u64, id: Option<CommandId>, reply: Option<Digest>, duplicate: bool },
    CheckpointTaken { seq: u64, digest: Digest },
    CheckpointInstalled { seq: u64, digest: Digest },
    Submitted { id: CommandId },
    Delivered { id: CommandId, digest: Digest },
    ViewAnnounced { view: u64 },
    ViewAdopted { view: u64 },
    NewViewStarted { view: u64, start: u64, end: u64 },
    Decided { view: u64, digest: Digest },
    Rejected { view: u64 },
    Alarm { what: &'static str, seq: u64 },
}

#[derive(Debug, Default)]
pub struct Outbox {
    pub sends: Vec<(Dest, Body)>,
    pub events: Vec<ProtocolEvent>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, dest: Dest, body: Body) {
        self.sends.push((dest, body));
    }

    pub fn event(&mut self, e: ProtocolEvent) {
        self.events.push(e);
    }

    pub fn clear(&mut self) {
        self.sends.clear();
        self.events.clear();
    }
}

/// Host-side end of a control loop: the value reported by a threshold of
/// monitors.
#[derive(Debug, Clone)]
pub struct Observer {
    threshold: usize,
    inputs: OpinionSet<u16, u64>,
    value: Option<u64>,
}

impl Observer {
    pub fn new(threshold: usize) -> Self {
        Observer {
            threshold: threshold.max(1),
            inputs: OpinionSet::new(),
            value: None,
        }
    }

    pub fn value(&self) -> Option<u64> {
        self.value
    }

    /// Returns the new value if it grew.
    pub fn observe(&mut self, monitor: u16, v: u64) -> Option<u64> {
        self.inputs.report(monitor, v);
        let nv = self.inputs.highest(self.threshold);
        if nv > self.value {
            self.value = nv;
            nv
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportTarget {
    Loop(ControlLoop),
    Submission,
}

/// Source-side end of a control loop: rate-limited, periodically refreshed
/// reports of a monotone value.
#[derive(Debug, Clone)]
pub struct Reporter {
    target: ReportTarget,
    value: u64,
    sent: Option<u64>,
    last: Millis,
}

impl Reporter {
    pub fn new(target: ReportTarget) -> Self {
        Reporter {
            target,
            value: 0,
            sent: None,
            last: 0,
        }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn set(&mut self, v: u64) {
        self.value = self.value.max(v);
    }

    fn emit(&mut self, now: Millis, out: &mut Outbox) {
        let (dest, body) = match self.target {
            ReportTarget::Loop(control) => (
                flows::monitor_of(control),
                Body::Report {
                    control,
                    value: self.value,
                },
            ),
            ReportTarget::Submission => (
                ClusterRole::Controller,
                Body::SubmissionProgress { count: self.value },
            ),
        };
        out.send(Dest::Cluster(dest), body);
        self.sent = Some(self.value);
        self.last = now;
    }

    pub fn poll(&mut self, now: Millis, timing: &Timing, out: &mut Outbox) {
        let changed = self.sent != Some(self.value);
        let due = now >= self.last + timing.control_period;
        if (changed && due) || now >= self.last + timing.refresh {
            self.emit(now, out);
        }
    }

    /// Sends immediately if the value changed.
    pub fn flush(&mut self, now: Millis, out: &mut Outbox) {
        if self.sent != Some(self.value) {
            self.emit(now, out);
        }
    }
}

/// Any replica or client.
#[derive(Debug, Clone)]
pub enum Replica {
    FrontEnd(FrontEnd),
    Proposer(Proposer),
    Committer(Committer),
    Executor(Executor),
    Controller(Controller),
    Monitor(Monitor),
    Client(Client),
    Preparer(Preparer),
    Conservator(Conservator),
    Curator(Curator),
    Auditor(Auditor),
    RecordKeeper(RecordKeeper),
}

macro_rules! dispatch {
    ($self:ident, $r:ident => $e:expr) => {
        match $self {
            Replica::FrontEnd($r) => $e,
            Replica::Proposer($r) => $e,
            Replica::Committer($r) => $e,
            Replica::Executor($r) => $e,
            Replica::Controller($r) => $e,
            Replica::Monitor($r) => $e,
            Replica::Client($r) => $e,
            Replica::Preparer($r) => $e,
            Replica::Conservator($r) => $e,
            Replica::Curator($r) => $e,
            Replica::Auditor($r) => $e,
            Replica::RecordKeeper($r) => $e,
        }
    };
}

impl Replica {
    pub fn new(id: ReplicaId, cfg: &Arc<ProtocolConfig>) -> Replica {
        let cfg = cfg.clone();
        match id.cluster {
            ClusterRole::FrontEnd => Replica::FrontEnd(FrontEnd::new(id, cfg)),
            ClusterRole::Proposer => Replica::Proposer(Proposer::new(id, cfg)),
            ClusterRole::Committer => Replica::Committer(Committer::new(id, cfg)),
            ClusterRole::Executor => Replica::Executor(Executor::new(id, cfg)),
            ClusterRole::Controller => Replica::Controller(Controller::new(id, cfg)),
            ClusterRole::AgreementMonitor
            | ClusterRole::CompletionMonitor
            | ClusterRole::ViewMonitor => Replica::Monitor(Monitor::new(id, cfg)),
            ClusterRole::Client => Replica::Client(Client::new(u32::from(id.index), cfg)),
            ClusterRole::Preparer => Replica::Preparer(Preparer::new(id, cfg)),
            ClusterRole::Conservator => Replica::Conservator(Conservator::new(id, cfg)),
            ClusterRole::Curator => Replica::Curator(Curator::new(id, cfg)),
            ClusterRole::Auditor => Replica::Auditor(Auditor::new(id, cfg)),
            ClusterRole::RecordKeeper => Replica::RecordKeeper(RecordKeeper::new(id, cfg)),
        }
    }

    pub fn id(&self) -> ReplicaId {
        dispatch!(self, r => r.id())
    }

    pub fn cfg(&self) -> &Arc<ProtocolConfig> {
        dispatch!(self, r => r.cfg())
    }

    /// Handles one delivered message. Messages on flows the protocol does
    /// not define are dropped.
    pub fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        let me = self.id().cluster;
        if !self.cfg().accepts(env.sender.cluster, env.kind, me) {
            return;
        }
        dispatch!(self, r => r.on_message(env, now, out))
    }

    pub fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        dispatch!(self, r => r.on_tick(now, out))
    }
}

/// Common accessors every role implements.
pub(crate) trait Role {
    fn id(&self) -> ReplicaId;
    fn cfg(&self) -> &Arc<ProtocolConfig>;
    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox);
    fn on_tick(&mut self, now: Millis, out: &mut Outbox);
}
