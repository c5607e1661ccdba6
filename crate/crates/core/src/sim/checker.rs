//! Safety and liveness verdicts computed from a trace alone.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::trace::{SimTrace, TraceEvent};
use crate::command::{fnv1a, Command, CommandId, Digest};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::state::{ExecState, Outcome};

/// Violations kept in full; the rest are only counted.
const KEPT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two honest executors executed different commands in the same slot.
    Divergence {
        seq: u64,
        a: ReplicaId,
        a_id: Option<CommandId>,
        b: ReplicaId,
        b_id: Option<CommandId>,
    },
    /// A checkpoint that does not match sequential execution of the
    /// committed order.
    Checkpoint {
        seq: u64,
        replica: ReplicaId,
        digest: Digest,
        expected: Digest,
        installed: bool,
    },
    ExecutorReply { seq: u64, replica: ReplicaId },
    /// A client accepted a result that differs from the oracle's.
    ClientReply { id: CommandId, got: Digest, expected: Digest },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |id: &Option<CommandId>| match id {
            Some(id) => alloc::format!("{id}"),
            None => alloc::string::String::from("noop"),
        };
        match self {
            Violation::Divergence { seq, a, a_id, b, b_id } => {
                write!(f, "divergence seq={seq} {a}={} {b}={}", show(a_id), show(b_id))
            }
            Violation::Checkpoint {
                seq,
                replica,
                digest,
                expected,
                installed,
            } => {
                let how = if *installed { "installed" } else { "taken" };
                write!(f, "checkpoint seq={seq} {replica} {how} {digest:016x} expected {expected:016x}")
            }
            Violation::ExecutorReply { seq, replica } => write!(f, "executor-reply seq={seq} {replica}"),
            Violation::ClientReply { id, got, expected } => {
                write!(f, "client-reply id={id} got {got:016x} expected {expected:016x}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafetyVerdict {
    pub violations: Vec<Violation>,
    pub divergences: u64,
    pub bad_checkpoints: u64,
    pub bad_executor_replies: u64,
    pub incorrect_replies: u64,
    pub verified_replies: u64,
    /// Slots re-executed by the oracle.
    pub oracle_slots: u64,
}

impl SafetyVerdict {
    pub fn passed(&self) -> bool {
        self.divergences + self.bad_checkpoints + self.bad_executor_replies + self.incorrect_replies == 0
    }

    fn add(&mut self, v: Violation) {
        match v {
            Violation::Divergence { .. } => self.divergences += 1,
            Violation::Checkpoint { .. } => self.bad_checkpoints += 1,
            Violation::ExecutorReply { .. } => self.bad_executor_replies += 1,
            Violation::ClientReply { .. } => self.incorrect_replies += 1,
        }
        if self.violations.len() < KEPT {
            self.violations.push(v);
        }
    }
}

#[derive(Debug, Default)]
struct ExecLog {
    executed: BTreeMap<u64, (Option<CommandId>, Option<Digest>)>,
    checkpoints: Vec<(u64, Digest, bool)>,
}

pub fn check_safety(trace: &SimTrace) -> SafetyVerdict {
    let faults = trace.faults();
    let mut v = SafetyVerdict::default();
    let mut logs: BTreeMap<ReplicaId, ExecLog> = BTreeMap::new();
    let mut submits: BTreeMap<CommandId, (u64, Arc<[u8]>)> = BTreeMap::new();
    let mut delivered: Vec<(CommandId, Digest)> = Vec::new();
    for r in &trace.records {
        match &r.event {
            TraceEvent::Submit { id, client_low, payload } => {
                submits.entry(*id).or_insert((*client_low, payload.clone()));
            }
            TraceEvent::Reply { id, digest } => delivered.push((*id, *digest)),
            TraceEvent::Execute { seq, id, reply, .. } if faults.honest(r.node) => {
                logs.entry(r.node).or_default().executed.insert(*seq, (*id, *reply));
            }
            TraceEvent::Checkpoint { seq, digest, installed }
                if r.node.cluster == ClusterRole::Executor && faults.honest(r.node) =>
            {
                logs.entry(r.node).or_default().checkpoints.push((*seq, *digest, *installed));
            }
            _ => {}
        }
    }

    // agreement on the committed order
    let mut order: BTreeMap<u64, (ReplicaId, Option<CommandId>)> = BTreeMap::new();
    for (replica, log) in &logs {
        for (seq, (id, _)) in &log.executed {
            match order.get(seq) {
                None => {
                    order.insert(*seq, (*replica, *id));
                }
                Some((first, fid)) if fid != id => v.add(Violation::Divergence {
                    seq: *seq,
                    a: *first,
                    a_id: *fid,
                    b: *replica,
                    b_id: *id,
                }),
                Some(_) => {}
            }
        }
    }

    // sequential re-execution of the agreed order
    let wanted: BTreeSet<u64> = logs.values().flat_map(|l| l.checkpoints.iter().map(|c| c.0)).collect();
    let mut state = ExecState::new();
    let mut state_digest: BTreeMap<u64, Digest> = BTreeMap::new();
    let mut expected_reply: BTreeMap<CommandId, Digest> = BTreeMap::new();
    let mut slot_reply: BTreeMap<u64, Option<Digest>> = BTreeMap::new();
    if wanted.contains(&0) {
        state_digest.insert(0, state.digest());
    }
    let mut seq = 0;
    while let Some((_, id)) = order.get(&seq) {
        let value = match id {
            None => None,
            Some(id) => match submits.get(id) {
                Some((low, payload)) => Some(Command {
                    id: *id,
                    payload: payload.clone(),
                    client_low: *low,
                    seal: 0,
                }),
                None => break,
            },
        };
        let reply = match state.execute(&value) {
            Outcome::Noop | Outcome::Duplicate(None) => None,
            Outcome::Duplicate(Some(r)) => Some(fnv1a(&r)),
            Outcome::Executed(r) => {
                let d = fnv1a(&r);
                if let Some(id) = id {
                    expected_reply.entry(*id).or_insert(d);
                }
                Some(d)
            }
        };
        slot_reply.insert(seq, reply);
        seq += 1;
        if wanted.contains(&state.slots) {
            state_digest.insert(state.slots, state.digest());
        }
    }
    v.oracle_slots = seq;

    for (replica, log) in &logs {
        for (s, (_, reply)) in &log.executed {
            if let Some(expected) = slot_reply.get(s) {
                if expected != reply {
                    v.add(Violation::ExecutorReply { seq: *s, replica: *replica });
                }
            }
        }
        for (s, digest, installed) in &log.checkpoints {
            if let Some(expected) = state_digest.get(s) {
                if expected != digest {
                    v.add(Violation::Checkpoint {
                        seq: *s,
                        replica: *replica,
                        digest: *digest,
                        expected: *expected,
                        installed: *installed,
                    });
                }
            }
        }
    }
    for (id, got) in delivered {
        if let Some(expected) = expected_reply.get(&id) {
            if *expected == got {
                v.verified_replies += 1;
            } else {
                v.add(Violation::ClientReply {
                    id,
                    got,
                    expected: *expected,
                });
            }
        }
    }
    v
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LivenessVerdict {
    /// Commands that had to be executed.
    pub obligations: u64,
    /// Commands some live executor never executed, with the executor.
    pub missing: Vec<(CommandId, ReplicaId)>,
    pub missing_count: u64,
}

impl LivenessVerdict {
    pub fn passed(&self) -> bool {
        self.missing_count == 0
    }
}

/// Every command a live front end accepted at least `settle` before the
/// horizon must have been executed by every live executor.
pub fn check_liveness(trace: &SimTrace, gst: Millis, settle: Millis) -> LivenessVerdict {
    let faults = trace.faults();
    let deadline = trace.header.horizon.saturating_sub(settle).max(gst);
    let mut accepted: BTreeSet<CommandId> = BTreeSet::new();
    let mut seq_of: BTreeMap<CommandId, u64> = BTreeMap::new();
    let mut frontier: BTreeMap<ReplicaId, u64> = BTreeMap::new();
    for r in &trace.records {
        match &r.event {
            TraceEvent::Accept { id } if r.time <= deadline && faults.live(r.node) => {
                accepted.insert(*id);
            }
            TraceEvent::Execute { seq, id, duplicate, .. } if r.node.cluster == ClusterRole::Executor => {
                let f = frontier.entry(r.node).or_default();
                *f = (*f).max(seq + 1);
                if let (Some(id), false, true) = (id, duplicate, faults.honest(r.node)) {
                    seq_of.entry(*id).or_insert(*seq);
                }
            }
            TraceEvent::Checkpoint { seq, installed: true, .. } => {
                let f = frontier.entry(r.node).or_default();
                *f = (*f).max(*seq);
            }
            _ => {}
        }
    }
    let executors: Vec<ReplicaId> = (0..trace.header.executors)
        .map(|i| ReplicaId::new(ClusterRole::Executor, i))
        .filter(|r| faults.live(*r))
        .collect();
    let mut v = LivenessVerdict {
        obligations: accepted.len() as u64,
        ..LivenessVerdict::default()
    };
    for id in accepted {
        for e in &executors {
            let done = seq_of
                .get(&id)
                .is_some_and(|s| frontier.get(e).copied().unwrap_or(0) > *s);
            if !done {
                v.missing_count += 1;
                if v.missing.len() < KEPT {
                    v.missing.push((id, *e));
                }
            }
        }
    }
    v
}
