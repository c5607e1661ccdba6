use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use super::proposer::entry_key;
use super::{CommitMatch, Dest, Observer, Outbox, ProtocolConfig, ProtocolEvent, ReportTarget, Reporter, Role};
use crate::command::{fnv1a, value_digest, Digest, Value};
use crate::envelope::{Body, ControlLoop, Envelope, Progress, SlotEntry};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::quorum::{quorum_match, QuorumError};
use crate::state::{ExecState, Outcome};
use crate::window::{checkpoint_floor, CHECKPOINT_INTERVAL};

const KEPT_CHECKPOINTS: usize = 4;

#[derive(Debug, Clone, Default)]
struct ViewVotes {
    confirms: BTreeMap<u16, SlotEntry>,
    first: Option<u16>,
}

#[derive(Debug, Clone, Default)]
struct ExecSlot {
    views: BTreeMap<u64, ViewVotes>,
    committed: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutorMode {
    Execution,
    Sync,
}

/// Commits confirmed slots, executes them in order and answers clients.
#[derive(Debug, Clone)]
pub struct Executor {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    mode: ExecutorMode,
    state: ExecState,
    slots: BTreeMap<u64, ExecSlot>,
    checkpoints: BTreeMap<u64, (Digest, Arc<ExecState>)>,
    completion_obs: Observer,
    stable: u64,
    offers: BTreeMap<u16, (u64, Digest, Arc<ExecState>)>,
    last_request: Option<Millis>,
    agreement: Reporter,
    completion: Reporter,
}

impl Executor {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let t = cfg.thresholds;
        Executor {
            id,
            completion_obs: Observer::new(t.observer(ControlLoop::Completion)),
            cfg,
            mode: ExecutorMode::Execution,
            state: ExecState::new(),
            slots: BTreeMap::new(),
            checkpoints: BTreeMap::new(),
            stable: 0,
            offers: BTreeMap::new(),
            last_request: None,
            agreement: Reporter::new(ReportTarget::Loop(ControlLoop::Agreement)),
            completion: Reporter::new(ReportTarget::Loop(ControlLoop::Completion)),
        }
    }

    pub fn mode(&self) -> ExecutorMode {
        self.mode
    }

    pub fn state(&self) -> &ExecState {
        &self.state
    }

    /// Number of executed slots.
    pub fn executed(&self) -> u64 {
        self.state.slots
    }

    pub fn checkpoint(&self, seq: u64) -> Option<&(Digest, Arc<ExecState>)> {
        self.checkpoints.get(&seq)
    }

    pub fn latest_checkpoint(&self) -> Option<(u64, &(Digest, Arc<ExecState>))> {
        self.checkpoints.iter().next_back().map(|(s, c)| (*s, c))
    }

    pub fn committed(&self, seq: u64) -> Option<&Value> {
        self.slots.get(&seq).and_then(|s| s.committed.as_ref())
    }

    /// First slot not yet committed.
    pub fn committed_frontier(&self) -> u64 {
        let mut s = self.state.slots;
        while self.slots.get(&s).is_some_and(|x| x.committed.is_some()) {
            s += 1;
        }
        s
    }

    pub fn on_confirm(&mut self, from: ReplicaId, e: &SlotEntry, now: Millis, out: &mut Outbox) {
        if e.seq < self.state.slots || e.seq >= self.state.slots + self.cfg.window {
            return;
        }
        let slot = self.slots.entry(e.seq).or_default();
        if slot.committed.is_some() {
            return;
        }
        let votes = slot.views.entry(e.view).or_default();
        votes.confirms.entry(from.index).or_insert_with(|| e.clone());
        votes.first.get_or_insert(from.index);
        let threshold = self.cfg.thresholds.confirm;
        let decided = match self.cfg.features.commit_match {
            CommitMatch::SlotOnly => (votes.confirms.len() >= threshold)
                .then(|| votes.confirms[&votes.first.expect("first vote")].value.clone()),
            CommitMatch::Value => {
                let keys: BTreeMap<u16, (u64, u64)> =
                    votes.confirms.iter().map(|(k, c)| (*k, entry_key(c))).collect();
                match quorum_match(&keys, threshold) {
                    Ok(Some(key)) => votes
                        .confirms
                        .values()
                        .find(|c| entry_key(c) == key)
                        .map(|c| c.value.clone()),
                    Ok(None) => None,
                    Err(QuorumError::AmbiguousQuorum) => {
                        out.event(ProtocolEvent::Alarm {
                            what: "ambiguous commit quorum",
                            seq: e.seq,
                        });
                        None
                    }
                }
            }
        };
        if let Some(value) = decided {
            out.event(ProtocolEvent::Committed {
                view: e.view,
                seq: e.seq,
                digest: value_digest(&value),
                id: value.as_ref().map(|c| c.id),
            });
            slot.committed = Some(value);
            slot.views.clear();
            self.execute_ready(now, out);
        }
    }

    fn execute_ready(&mut self, now: Millis, out: &mut Outbox) {
        loop {
            let seq = self.state.slots;
            let Some(value) = self.slots.get(&seq).and_then(|s| s.committed.clone()) else {
                break;
            };
            self.slots.remove(&seq);
            let outcome = self.state.execute(&value);
            let id = value.as_ref().map(|c| c.id);
            let (reply, duplicate) = match &outcome {
                Outcome::Noop => (None, false),
                Outcome::Duplicate(r) => (r.clone(), true),
                Outcome::Executed(r) => (Some(r.clone()), false),
            };
            out.event(ProtocolEvent::Executed {
                seq,
                id,
                reply: reply.as_ref().map(|r| fnv1a(r)),
                duplicate,
            });
            if let (Some(id), Some(result)) = (id, reply) {
                out.send(
                    Dest::Replica(ReplicaId::client(id.client)),
                    Body::Reply { id, result },
                );
            }
            if self.state.slots % CHECKPOINT_INTERVAL == 0 {
                self.take_checkpoint(out);
            }
        }
        self.update_progress();
        self.update_mode(now, out);
    }

    fn take_checkpoint(&mut self, out: &mut Outbox) {
        let digest = self.state.digest();
        let seq = self.state.slots;
        self.checkpoints.insert(seq, (digest, Arc::new(self.state.clone())));
        while self.checkpoints.len() > KEPT_CHECKPOINTS {
            self.checkpoints.pop_first();
        }
        out.event(ProtocolEvent::CheckpointTaken { seq, digest });
    }

    fn update_progress(&mut self) {
        self.agreement.set(self.committed_frontier());
        self.completion.set(
            Progress {
                slots: self.state.slots,
                commands: self.state.commands,
            }
            .pack(),
        );
    }

    fn update_mode(&mut self, now: Millis, out: &mut Outbox) {
        if self.stable > self.state.slots {
            if self.mode == ExecutorMode::Execution {
                self.mode = ExecutorMode::Sync;
                self.request_checkpoint(now, out);
            }
        } else {
            self.mode = ExecutorMode::Execution;
            self.offers.clear();
        }
    }

    fn request_checkpoint(&mut self, now: Millis, out: &mut Outbox) {
        self.last_request = Some(now);
        out.send(Dest::Peers, Body::CheckpointRequest { seq: self.stable });
    }

    fn on_checkpoint_request(&self, from: ReplicaId, seq: u64, out: &mut Outbox) {
        let found = self
            .checkpoints
            .get(&seq)
            .map(|c| (seq, c))
            .or_else(|| self.checkpoints.range(seq..).next_back().map(|(s, c)| (*s, c)));
        if let Some((s, (digest, state))) = found {
            out.send(
                Dest::Replica(from),
                Body::Checkpoint {
                    seq: s,
                    digest: *digest,
                    state: state.clone(),
                },
            );
        }
    }

    fn on_checkpoint(&mut self, from: ReplicaId, seq: u64, digest: Digest, state: &Arc<ExecState>, now: Millis, out: &mut Outbox) {
        if seq <= self.state.slots || state.slots != seq || state.digest() != digest {
            return;
        }
        self.offers.insert(from.index, (seq, digest, state.clone()));
        let keys: BTreeMap<u16, (u64, Digest)> = self.offers.iter().map(|(k, (s, d, _))| (*k, (*s, *d))).collect();
        let mut counts: BTreeMap<(u64, Digest), usize> = BTreeMap::new();
        for key in keys.values() {
            *counts.entry(*key).or_default() += 1;
        }
        let best = counts
            .into_iter()
            .filter(|(_, n)| *n >= self.cfg.thresholds.checkpoint)
            .map(|(k, _)| k)
            .max();
        if let Some((s, d)) = best {
            let st = self
                .offers
                .values()
                .find(|(os, od, _)| *os == s && *od == d)
                .map(|(_, _, st)| st.clone())
                .expect("offered state");
            self.install(s, d, st, now, out);
        }
    }

    fn install(&mut self, seq: u64, digest: Digest, state: Arc<ExecState>, now: Millis, out: &mut Outbox) {
        self.state = (*state).clone();
        self.slots = self.slots.split_off(&seq);
        self.checkpoints.insert(seq, (digest, state));
        while self.checkpoints.len() > KEPT_CHECKPOINTS {
            self.checkpoints.pop_first();
        }
        self.offers.clear();
        out.event(ProtocolEvent::CheckpointInstalled { seq, digest });
        self.execute_ready(now, out);
    }
}

impl Role for Executor {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Confirm(e) => self.on_confirm(env.sender, e, now, out),
            Body::FetchReply { id } => {
                if env.sender == ReplicaId::client(id.client) {
                    if let Some(r) = self.state.reply_for(id.client, id.counter) {
                        out.send(
                            Dest::Replica(env.sender),
                            Body::Reply {
                                id: *id,
                                result: r.clone(),
                            },
                        );
                    }
                }
            }
            Body::CheckpointRequest { seq } => self.on_checkpoint_request(env.sender, *seq, out),
            Body::Checkpoint { seq, digest, state } => {
                self.on_checkpoint(env.sender, *seq, *digest, state, now, out)
            }
            Body::Notify {
                control: ControlLoop::Completion,
                value,
            } if env.sender.cluster == ClusterRole::CompletionMonitor => {
                if let Some(v) = self.completion_obs.observe(env.sender.index, *value) {
                    self.stable = self.stable.max(checkpoint_floor(Progress::unpack(v).slots));
                    self.update_mode(now, out);
                }
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        let timing = self.cfg.timing;
        self.agreement.poll(now, &timing, out);
        self.completion.poll(now, &timing, out);
        if self.mode == ExecutorMode::Sync
            && self.last_request.is_none_or(|t| now >= t + timing.retransmit)
        {
            self.request_checkpoint(now, out);
        }
    }
}
