//! Messages exchanged between clusters.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::auth::AuthTag;
use crate::command::{value_digest, Command, CommandId, Digest, Fnv64, Value};
use crate::ids::{Coordinates, ReplicaId};
use crate::state::ExecState;

/// The three control loops run by monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlLoop {
    /// Committed-slot frontier reported by executors.
    Agreement,
    /// Execution progress reported by executors.
    Completion,
    /// View numbers announced by controllers.
    View,
}

impl ControlLoop {
    pub const ALL: [ControlLoop; 3] = [ControlLoop::Agreement, ControlLoop::Completion, ControlLoop::View];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Execution progress packed into a single ordered number: executed slots in
/// the high half, executed commands in the low half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Progress {
    pub slots: u64,
    pub commands: u64,
}

impl Progress {
    pub fn pack(self) -> u64 {
        (self.slots.min(u32::MAX as u64) << 32) | self.commands.min(u32::MAX as u64)
    }

    pub fn unpack(v: u64) -> Self {
        Progress {
            slots: v >> 32,
            commands: v & 0xffff_ffff,
        }
    }
}

/// A proposal for one slot, as produced by the leader and relayed onwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotEntry {
    pub view: u64,
    pub seq: u64,
    pub value: Value,
    pub proof: AuthTag,
}

impl SlotEntry {
    pub fn coords(&self) -> Coordinates {
        Coordinates::new(self.view, self.seq)
    }

    pub fn value_digest(&self) -> Digest {
        value_digest(&self.value)
    }
}

/// What a committer (or preparer) accepted so far, sent when a view changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryReport {
    /// The view being entered.
    pub view: u64,
    /// The reporter's window low (stable checkpoint).
    pub low: u64,
    pub entries: Vec<SlotEntry>,
}

/// A conservator's summary of the evidence for a new view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservatorReport {
    pub view: u64,
    pub start: u64,
    /// Highest-view supported entry per slot, ordered by seq.
    pub entries: Vec<SlotEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecidedSlot {
    pub value: Value,
    /// View of the evidence the value came from; `None` for filled gaps.
    pub from_view: Option<u64>,
}

/// The agreed set of values to re-propose when entering a view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewViewDecision {
    pub view: u64,
    /// Conservators whose reports the decision was built from.
    pub basis: Vec<u16>,
    pub start: u64,
    pub slots: Vec<DecidedSlot>,
}

impl NewViewDecision {
    pub fn end(&self) -> u64 {
        self.start + self.slots.len() as u64
    }

    pub fn slot(&self, seq: u64) -> Option<&DecidedSlot> {
        seq.checked_sub(self.start)
            .and_then(|i| self.slots.get(i as usize))
    }

    pub fn digest(&self) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(self.view);
        h.write_u64(self.start);
        h.write_u64(self.basis.len() as u64);
        for b in &self.basis {
            h.write_u64(u64::from(*b));
        }
        for s in &self.slots {
            h.write_u64(value_digest(&s.value));
            h.write_u64(s.from_view.map_or(u64::MAX, |v| v));
        }
        h.finish()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum Body {
    Request(Command),
    Gossip(Command),
    Offer(Command),
    SubmissionProgress { count: u64 },
    Proposal(SlotEntry),
    Prepare(SlotEntry),
    Confirm(SlotEntry),
    Reply { id: CommandId, result: Arc<[u8]> },
    FetchReply { id: CommandId },
    CheckpointRequest { seq: u64 },
    Checkpoint { seq: u64, digest: Digest, state: Arc<ExecState> },
    Report { control: ControlLoop, value: u64 },
    Forward { control: ControlLoop, value: u64 },
    Notify { control: ControlLoop, value: u64 },
    History(Arc<HistoryReport>),
    Evidence(Arc<HistoryReport>),
    PrepareReport(Arc<HistoryReport>),
    Basis(Arc<ConservatorReport>),
    Decision(Arc<NewViewDecision>),
    Voucher(Arc<NewViewDecision>),
    Rejection { view: u64 },
    NewView(Arc<NewViewDecision>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Request,
    Gossip,
    Offer,
    SubmissionProgress,
    Proposal,
    Prepare,
    Confirm,
    Reply,
    FetchReply,
    CheckpointRequest,
    Checkpoint,
    Report,
    Forward,
    Notify,
    History,
    Evidence,
    PrepareReport,
    Basis,
    Decision,
    Voucher,
    Rejection,
    NewView,
}

impl MessageKind {
    pub const ALL: [MessageKind; 22] = [
        MessageKind::Request,
        MessageKind::Gossip,
        MessageKind::Offer,
        MessageKind::SubmissionProgress,
        MessageKind::Proposal,
        MessageKind::Prepare,
        MessageKind::Confirm,
        MessageKind::Reply,
        MessageKind::FetchReply,
        MessageKind::CheckpointRequest,
        MessageKind::Checkpoint,
        MessageKind::Report,
        MessageKind::Forward,
        MessageKind::Notify,
        MessageKind::History,
        MessageKind::Evidence,
        MessageKind::PrepareReport,
        MessageKind::Basis,
        MessageKind::Decision,
        MessageKind::Voucher,
        MessageKind::Rejection,
        MessageKind::NewView,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Request => "request",
            MessageKind::Gossip => "gossip",
            MessageKind::Offer => "offer",
            MessageKind::SubmissionProgress => "submission-progress",
            MessageKind::Proposal => "proposal",
            MessageKind::Prepare => "prepare",
            MessageKind::Confirm => "confirm",
            MessageKind::Reply => "reply",
            MessageKind::FetchReply => "fetch-reply",
            MessageKind::CheckpointRequest => "checkpoint-request",
            MessageKind::Checkpoint => "checkpoint",
            MessageKind::Report => "report",
            MessageKind::Forward => "forward",
            MessageKind::Notify => "notify",
            MessageKind::History => "history",
            MessageKind::Evidence => "evidence",
            MessageKind::PrepareReport => "prepare-report",
            MessageKind::Basis => "basis",
            MessageKind::Decision => "decision",
            MessageKind::Voucher => "voucher",
            MessageKind::Rejection => "rejection",
            MessageKind::NewView => "new-view",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        MessageKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl core::str::FromStr for MessageKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::from_name(s.trim()).ok_or_else(|| UnknownKind(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown message kind `{0}`")]
pub struct UnknownKind(pub alloc::string::String);

impl serde::Serialize for MessageKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for MessageKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Body {
    pub fn kind(&self) -> MessageKind {
        match self {
            Body::Request(_) => MessageKind::Request,
            Body::Gossip(_) => MessageKind::Gossip,
            Body::Offer(_) => MessageKind::Offer,
            Body::SubmissionProgress { .. } => MessageKind::SubmissionProgress,
            Body::Proposal(_) => MessageKind::Proposal,
            Body::Prepare(_) => MessageKind::Prepare,
            Body::Confirm(_) => MessageKind::Confirm,
            Body::Reply { .. } => MessageKind::Reply,
            Body::FetchReply { .. } => MessageKind::FetchReply,
            Body::CheckpointRequest { .. } => MessageKind::CheckpointRequest,
            Body::Checkpoint { .. } => MessageKind::Checkpoint,
            Body::Report { .. } => MessageKind::Report,
            Body::Forward { .. } => MessageKind::Forward,
            Body::Notify { .. } => MessageKind::Notify,
            Body::History(_) => MessageKind::History,
            Body::Evidence(_) => MessageKind::Evidence,
            Body::PrepareReport(_) => MessageKind::PrepareReport,
            Body::Basis(_) => MessageKind::Basis,
            Body::Decision(_) => MessageKind::Decision,
            Body::Voucher(_) => MessageKind::Voucher,
            Body::Rejection { .. } => MessageKind::Rejection,
            Body::NewView(_) => MessageKind::NewView,
        }
    }

    pub fn coords(&self) -> Option<Coordinates> {
        match self {
            Body::Proposal(e) | Body::Prepare(e) | Body::Confirm(e) => Some(e.coords()),
            Body::Checkpoint { seq, .. } | Body::CheckpointRequest { seq } => {
                Some(Coordinates::new(0, *seq))
            }
            Body::History(r) | Body::Evidence(r) | Body::PrepareReport(r) => {
                Some(Coordinates::new(r.view, r.low))
            }
            Body::Basis(r) => Some(Coordinates::new(r.view, r.start)),
            Body::Decision(d) | Body::Voucher(d) | Body::NewView(d) => {
                Some(Coordinates::new(d.view, d.start))
            }
            Body::Rejection { view } => Some(Coordinates::new(*view, 0)),
            _ => None,
        }
    }
}

impl fmt::Debug for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Request(c) | Body::Gossip(c) | Body::Offer(c) => {
                write!(f, "{}({})", self.kind(), c.id)
            }
            Body::Proposal(e) | Body::Prepare(e) | Body::Confirm(e) => write!(
                f,
                "{}(v{} s{} {:?})",
                self.kind(),
                e.view,
                e.seq,
                e.value.as_ref().map(|c| c.id)
            ),
            Body::Reply { id, .. } | Body::FetchReply { id } => write!(f, "{}({id})", self.kind()),
            Body::Report { control, value }
            | Body::Forward { control, value }
            | Body::Notify { control, value } => {
                write!(f, "{}({control:?}={value})", self.kind())
            }
            other => write!(f, "{}({:?})", other.kind(), other.coords()),
        }
    }
}

/// An authenticated message in flight.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub sender: ReplicaId,
    pub kind: MessageKind,
    pub coords: Option<Coordinates>,
    pub body: Arc<Body>,
    pub auth: AuthTag,
}

impl Envelope {
    /// The data the authentication tag covers.
    pub fn auth_message(sender: ReplicaId, kind: MessageKind, coords: Option<Coordinates>) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(sender.cluster.index() as u64);
        h.write_u64(u64::from(sender.index));
        h.write_u64(kind as u64);
        if let Some(c) = coords {
            h.write_u64(c.view);
            h.write_u64(c.seq);
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_packs_lexicographically() {
        let a = Progress { slots: 3, commands: 9 };
        let b = Progress { slots: 4, commands: 0 };
        assert!(a.pack() < b.pack());
        assert_eq!(Progress::unpack(a.pack()), a);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn decision_slot_lookup() {
        let d = NewViewDecision {
            view: 1,
            basis: Vec::new(),
            start: 16,
            slots: alloc::vec![DecidedSlot { value: None, from_view: None }; 3],
        };
        assert_eq!(d.end(), 19);
        assert!(d.slot(15).is_none());
        assert!(d.slot(18).is_some());
        assert!(d.slot(19).is_none());
    }
}
