use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{Dest, Observer, Outbox, ProtocolConfig, ProtocolEvent, Role};
use crate::auth::{proof_is_valid, proposal_proof, value_is_sealed, Authenticator};
use crate::command::{value_digest, Command, CommandId, Digest, Value};
use crate::envelope::{Body, ControlLoop, Envelope, HistoryReport, NewViewDecision, Progress, SlotEntry};
use crate::ids::{ClientId, ClusterRole, Coordinates, Millis, ReplicaId};
use crate::quorum::quorum_match;
use crate::window::{checkpoint_floor, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposerMode {
    Normal,
    ViewChange,
}

#[derive(Debug, Clone)]
pub struct Outgoing {
    pub entry: SlotEntry,
    pub last_sent: Millis,
}

/// Assigns sequence numbers to commands. Only the leader of the current view
/// proposes.
#[derive(Debug, Clone)]
pub struct Proposer {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    view: u64,
    mode: ProposerMode,
    next_seq: u64,
    window: Window<Outgoing>,
    pending: VecDeque<Command>,
    queued: BTreeSet<CommandId>,
    proposed: BTreeSet<CommandId>,
    client_lows: BTreeMap<ClientId, u64>,
    view_obs: Observer,
    completion_obs: Observer,
    agreement_obs: Observer,
    committed_frontier: u64,
    histories: BTreeMap<u64, BTreeMap<u16, Arc<HistoryReport>>>,
    new_views: BTreeMap<u64, BTreeMap<u16, Arc<NewViewDecision>>>,
}

/// Picks, per slot, the highest-view entry carrying a valid leader proof.
/// Ties keep the entry of the lowest reporter. Slots from the largest
/// reported low up to the highest reported entry are covered; gaps stay
/// `None`.
pub fn merge_histories<'a>(
    reports: impl IntoIterator<Item = &'a HistoryReport>,
    proposers: u16,
    auth: &dyn Authenticator,
) -> (u64, Vec<Option<SlotEntry>>) {
    let reports: Vec<&HistoryReport> = reports.into_iter().collect();
    let start = reports.iter().map(|r| r.low).max().unwrap_or(0);
    let mut best: BTreeMap<u64, &SlotEntry> = BTreeMap::new();
    for r in &reports {
        for e in &r.entries {
            if e.seq < start
                || !proof_is_valid(auth, proposers, e.coords(), &e.value, e.proof)
                || !value_is_sealed(auth, &e.value)
            {
                continue;
            }
            match best.get(&e.seq) {
                Some(b) if b.view >= e.view => {}
                _ => {
                    best.insert(e.seq, e);
                }
            }
        }
    }
    let end = best.keys().next_back().map_or(start, |s| s + 1);
    let slots = (start..end).map(|s| best.get(&s).map(|e| (*e).clone())).collect();
    (start, slots)
}

impl Proposer {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let t = cfg.thresholds;
        Proposer {
            id,
            window: Window::new(cfg.window),
            view_obs: Observer::new(t.observer(ControlLoop::View)),
            completion_obs: Observer::new(t.observer(ControlLoop::Completion)),
            agreement_obs: Observer::new(t.observer(ControlLoop::Agreement)),
            cfg,
            view: 0,
            mode: ProposerMode::Normal,
            next_seq: 0,
            pending: VecDeque::new(),
            queued: BTreeSet::new(),
            proposed: BTreeSet::new(),
            client_lows: BTreeMap::new(),
            committed_frontier: 0,
            histories: BTreeMap::new(),
            new_views: BTreeMap::new(),
        }
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn mode(&self) -> ProposerMode {
        self.mode
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn window_low(&self) -> u64 {
        self.window.low()
    }

    pub fn is_leader(&self) -> bool {
        self.cfg.leader(self.view) == self.id.index
    }

    pub fn pending(&self) -> impl Iterator<Item = &Command> {
        self.pending.iter()
    }

    pub fn proposals(&self) -> impl Iterator<Item = &SlotEntry> {
        self.window.iter().map(|(_, o)| &o.entry)
    }

    fn target(&self) -> ClusterRole {
        if self.cfg.features.agreement_stage {
            ClusterRole::Preparer
        } else {
            ClusterRole::Committer
        }
    }

    fn is_stale(&self, id: CommandId) -> bool {
        self.client_lows.get(&id.client).is_some_and(|l| id.counter < *l)
    }

    fn learn_low(&mut self, cmd: &Command) {
        let low = self.client_lows.entry(cmd.id.client).or_default();
        if cmd.client_low > *low {
            *low = cmd.client_low;
            let c = cmd.id.client;
            let l = *low;
            self.proposed.retain(|id| id.client != c || id.counter >= l);
        }
    }

    pub fn offer(&mut self, cmd: &Command, now: Millis, out: &mut Outbox) {
        self.learn_low(cmd);
        if self.is_stale(cmd.id) || self.queued.contains(&cmd.id) || self.proposed.contains(&cmd.id) {
            return;
        }
        self.queued.insert(cmd.id);
        self.pending.push_back(cmd.clone());
        self.propose(now, out);
    }

    fn emit(&mut self, seq: u64, value: Value, now: Millis, out: &mut Outbox) {
        let coords = Coordinates::new(self.view, seq);
        let proof = proposal_proof(self.cfg.auth.as_ref(), self.id.index, coords, &value);
        let entry = SlotEntry {
            view: self.view,
            seq,
            value,
            proof,
        };
        if let Some(c) = &entry.value {
            self.proposed.insert(c.id);
        }
        out.send(Dest::Cluster(self.target()), Body::Proposal(entry.clone()));
        let _ = self.window.insert(
            seq,
            Outgoing {
                entry,
                last_sent: now,
            },
        );
    }

    /// Proposes pending commands while the window has room.
    pub fn propose(&mut self, now: Millis, out: &mut Outbox) {
        if self.mode != ProposerMode::Normal || !self.is_leader() {
            return;
        }
        while self.next_seq < self.window.high() {
            let Some(cmd) = self.pending.pop_front() else {
                break;
            };
            self.queued.remove(&cmd.id);
            if self.is_stale(cmd.id) || self.proposed.contains(&cmd.id) {
                continue;
            }
            let seq = self.next_seq;
            self.next_seq += 1;
            self.emit(seq, Some(cmd), now, out);
        }
    }

    fn retransmit(&mut self, now: Millis, out: &mut Outbox) {
        let timing = self.cfg.timing;
        let target = self.target();
        for (seq, o) in self.window.iter_mut() {
            let period = if seq < self.committed_frontier {
                timing.slow_retransmit
            } else {
                timing.retransmit
            };
            if now >= o.last_sent + period {
                o.last_sent = now;
                out.send(Dest::Cluster(target), Body::Proposal(o.entry.clone()));
            }
        }
    }

    fn shift(&mut self, low: u64) {
        self.window.shift(low);
        self.next_seq = self.next_seq.max(self.window.low());
    }

    fn enter_view(&mut self, view: u64, now: Millis, out: &mut Outbox) {
        if view <= self.view {
            return;
        }
        self.view = view;
        out.event(ProtocolEvent::ViewAdopted { view });
        // unconfirmed proposals of the old view go back to the queue front
        let old: Vec<Command> = self
            .window
            .iter()
            .filter_map(|(_, o)| o.entry.value.clone())
            .collect();
        self.window.clear();
        self.proposed.clear();
        for cmd in old.into_iter().rev() {
            if !self.queued.contains(&cmd.id) && !self.is_stale(cmd.id) {
                self.queued.insert(cmd.id);
                self.pending.push_front(cmd);
            }
        }
        self.histories = self.histories.split_off(&view);
        self.new_views = self.new_views.split_off(&view);
        if self.is_leader() {
            self.mode = ProposerMode::ViewChange;
            self.try_finish_view_change(now, out);
        } else {
            self.mode = ProposerMode::Normal;
        }
    }

    fn try_finish_view_change(&mut self, now: Millis, out: &mut Outbox) {
        if self.mode != ProposerMode::ViewChange {
            return;
        }
        if self.cfg.features.agreement_stage {
            let Some(reports) = self.new_views.get(&self.view) else {
                return;
            };
            let digests: BTreeMap<u16, Digest> = reports.iter().map(|(k, d)| (*k, d.digest())).collect();
            let Ok(Some(d)) = quorum_match(&digests, self.cfg.thresholds.new_view) else {
                return;
            };
            let decision = reports.values().find(|r| r.digest() == d).cloned().expect("matched decision");
            let values = decision.slots.iter().map(|s| s.value.clone()).collect();
            self.install(decision.start, values, now, out);
        } else {
            let Some(reports) = self.histories.get(&self.view) else {
                return;
            };
            if reports.len() < self.cfg.thresholds.history {
                return;
            }
            let (start, slots) = merge_histories(
                reports.values().map(|r| r.as_ref()),
                self.cfg.proposers(),
                self.cfg.auth.as_ref(),
            );
            let values = slots.into_iter().map(|s| s.and_then(|e| e.value)).collect();
            self.install(start, values, now, out);
        }
    }

    /// Re-proposes `values` from `start` in the current view and resumes
    /// normal operation after them.
    fn install(&mut self, start: u64, values: Vec<Value>, now: Millis, out: &mut Outbox) {
        self.shift(start);
        let end = start + values.len() as u64;
        let reproposed: BTreeSet<CommandId> = values.iter().flatten().map(|c| c.id).collect();
        self.pending.retain(|c| !reproposed.contains(&c.id));
        self.queued.retain(|id| !reproposed.contains(id));
        for (i, v) in values.into_iter().enumerate() {
            let seq = start + i as u64;
            if seq >= self.window.low() && seq < self.window.high() {
                self.emit(seq, v, now, out);
            }
        }
        self.next_seq = end.max(self.window.low());
        self.mode = ProposerMode::Normal;
        out.event(ProtocolEvent::NewViewStarted {
            view: self.view,
            start,
            end,
        });
        self.propose(now, out);
    }

    fn on_notify(&mut self, from: ReplicaId, control: ControlLoop, value: u64, now: Millis, out: &mut Outbox) {
        match control {
            ControlLoop::View => {
                if let Some(v) = self.view_obs.observe(from.index, value) {
                    self.enter_view(v, now, out);
                }
            }
            ControlLoop::Completion => {
                if let Some(v) = self.completion_obs.observe(from.index, value) {
                    self.shift(checkpoint_floor(Progress::unpack(v).slots));
                    self.propose(now, out);
                }
            }
            ControlLoop::Agreement => {
                if let Some(v) = self.agreement_obs.observe(from.index, value) {
                    self.committed_frontier = v;
                }
            }
        }
    }
}

impl Role for Proposer {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Offer(cmd) => {
                if value_is_sealed(self.cfg.auth.as_ref(), &Some(cmd.clone())) {
                    self.offer(cmd, now, out)
                }
            }
            Body::Notify { control, value } => {
                if crate::protocol::flows::loop_of(env.sender.cluster) == Some(*control) {
                    self.on_notify(env.sender, *control, *value, now, out)
                }
            }
            Body::History(r) => {
                if r.view >= self.view {
                    self.histories
                        .entry(r.view)
                        .or_default()
                        .entry(env.sender.index)
                        .or_insert_with(|| r.clone());
                    self.try_finish_view_change(now, out);
                }
            }
            Body::NewView(d) => {
                if d.view >= self.view && d.view > 0 {
                    self.new_views
                        .entry(d.view)
                        .or_default()
                        .insert(env.sender.index, d.clone());
                    self.try_finish_view_change(now, out);
                }
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        self.propose(now, out);
        self.retransmit(now, out);
    }
}

/// Digest of a proposal's content, used when matching relayed proposals.
pub fn entry_key(e: &SlotEntry) -> (Digest, u64) {
    (value_digest(&e.value), e.proof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::KeyedFnv;
    use crate::protocol::testkit::*;

    fn leader(cfg: &Arc<ProtocolConfig>) -> Proposer {
        Proposer::new(rid(ClusterRole::Proposer, 0), cfg.clone())
    }

    fn proposals(out: &Outbox) -> Vec<(u64, u64)> {
        out.sends
            .iter()
            .filter_map(|(_, b)| match b {
                Body::Proposal(e) => Some((e.view, e.seq)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn leader_assigns_consecutive_seqs() {
        let cfg = config(&[], 1);
        let mut p = leader(&cfg);
        let mut out = Outbox::new();
        for i in 0..3 {
            p.offer(&command(&cfg, 0, i, 0), 0, &mut out);
        }
        assert_eq!(proposals(&out), [(0, 0), (0, 1), (0, 2)]);
        assert!(out
            .sends
            .iter()
            .all(|(d, _)| *d == Dest::Cluster(ClusterRole::Committer)));
    }

    #[test]
    fn non_leader_stays_silent() {
        let cfg = config(&[], 1);
        let mut p = Proposer::new(rid(ClusterRole::Proposer, 1), cfg.clone());
        let mut out = Outbox::new();
        p.offer(&command(&cfg, 0, 0, 0), 0, &mut out);
        p.on_tick(1000, &mut out);
        assert!(out.sends.is_empty());
    }

    #[test]
    fn full_window_applies_back_pressure() {
        let cfg = Arc::new((*config(&[], 1)).clone().with_window(4));
        let mut p = leader(&cfg);
        let mut out = Outbox::new();
        for i in 0..6 {
            p.offer(&command(&cfg, 0, i, 0), 0, &mut out);
        }
        assert_eq!(proposals(&out).len(), 4);
        assert_eq!(p.next_seq(), 4);
        // window moves once a checkpoint at 16 becomes stable; with capacity
        // 4 and checkpoint floor 0 nothing changes
        let mut out = Outbox::new();
        let v = Progress { slots: 3, commands: 3 }.pack();
        for m in 0..2 {
            p.on_message(&env(rid(ClusterRole::CompletionMonitor, m), notify(ControlLoop::Completion, v)), 5, &mut out);
        }
        assert!(proposals(&out).is_empty());
    }

    #[test]
    fn view_change_reproposes_reported_values() {
        let cfg = config(&[], 1);
        // proposer 1 leads view 1
        let mut p = Proposer::new(rid(ClusterRole::Proposer, 1), cfg.clone());
        let mut out = Outbox::new();
        for m in 0..2 {
            p.on_message(&env(rid(ClusterRole::ViewMonitor, m), notify(ControlLoop::View, 1)), 0, &mut out);
        }
        assert_eq!(p.mode(), ProposerMode::ViewChange);
        let x = command(&cfg, 0, 0, 0);
        let with_x = HistoryReport {
            view: 1,
            low: 0,
            entries: alloc::vec![entry(&cfg, 0, 5, Some(x.clone()))],
        };
        let empty = HistoryReport {
            view: 1,
            low: 0,
            entries: Vec::new(),
        };
        p.on_message(&env(rid(ClusterRole::Committer, 0), Body::History(Arc::new(with_x))), 1, &mut out);
        assert_eq!(p.mode(), ProposerMode::ViewChange);
        p.on_message(&env(rid(ClusterRole::Committer, 2), Body::History(Arc::new(empty))), 2, &mut out);
        assert_eq!(p.mode(), ProposerMode::Normal);
        let props: Vec<&SlotEntry> = out
            .sends
            .iter()
            .filter_map(|(_, b)| match b {
                Body::Proposal(e) => Some(e),
                _ => None,
            })
            .collect();
        assert_eq!(props.len(), 6);
        assert!(props.iter().all(|e| e.view == 1));
        assert_eq!(props[5].value.as_ref().map(|c| c.id), Some(x.id));
        assert!(props[..5].iter().all(|e| e.value.is_none()));
        assert_eq!(p.next_seq(), 6);
    }

    #[test]
    fn empty_view_change_returns_to_normal() {
        let cfg = config(&[], 1);
        let mut p = Proposer::new(rid(ClusterRole::Proposer, 1), cfg.clone());
        let mut out = Outbox::new();
        for m in 0..2 {
            p.on_message(&env(rid(ClusterRole::ViewMonitor, m), notify(ControlLoop::View, 1)), 0, &mut out);
        }
        for c in 0..2 {
            let r = HistoryReport {
                view: 1,
                low: 0,
                entries: Vec::new(),
            };
            p.on_message(&env(rid(ClusterRole::Committer, c), Body::History(Arc::new(r))), 1, &mut out);
        }
        assert_eq!(p.mode(), ProposerMode::Normal);
        assert_eq!(p.next_seq(), 0);
        // lower views are ignored afterwards
        for m in 0..2 {
            p.on_message(&env(rid(ClusterRole::ViewMonitor, m), notify(ControlLoop::View, 0)), 3, &mut out);
        }
        assert_eq!(p.view(), 1);
    }

    #[test]
    fn merge_discards_fabricated_entries() {
        let cfg = config(&[ClusterRole::Committer], 1);
        let auth = KeyedFnv::default();
        let y = command(&cfg, 0, 7, 0);
        let mut forged = entry(&cfg, 0, 3, Some(y));
        forged.proof ^= 1;
        let reports = [
            HistoryReport { view: 1, low: 0, entries: alloc::vec![forged] },
            HistoryReport { view: 1, low: 0, entries: Vec::new() },
            HistoryReport { view: 1, low: 0, entries: Vec::new() },
        ];
        let (start, slots) = merge_histories(reports.iter(), cfg.proposers(), &auth);
        assert_eq!(start, 0);
        assert!(slots.is_empty());
    }

    #[test]
    fn merge_prefers_higher_views() {
        let cfg = config(&[], 1);
        let auth = KeyedFnv::default();
        let a = command(&cfg, 0, 1, 0);
        let b = command(&cfg, 0, 2, 0);
        let reports = [
            HistoryReport { view: 3, low: 0, entries: alloc::vec![entry(&cfg, 0, 0, Some(a))] },
            HistoryReport { view: 3, low: 0, entries: alloc::vec![entry(&cfg, 2, 0, Some(b.clone()))] },
        ];
        let (_, slots) = merge_histories(reports.iter(), cfg.proposers(), &auth);
        assert_eq!(slots[0].as_ref().unwrap().value.as_ref().unwrap().id, b.id);
    }
}
