use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::proposer::entry_key;
use super::{Dest, Observer, Outbox, ProtocolConfig, ProtocolEvent, Role};
use crate::auth::{proof_is_valid, value_is_sealed};
use crate::envelope::{Body, ControlLoop, Envelope, HistoryReport, Progress, SlotEntry};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::quorum::{quorum_match, QuorumError};
use crate::window::{checkpoint_floor, Window};

#[derive(Debug, Clone, Default)]
struct CommitSlot {
    accepted: Option<SlotEntry>,
    last_sent: Millis,
    /// Preparer opinions for the current view.
    prepares: BTreeMap<u16, SlotEntry>,
}

/// Confirms sequence-number assignments towards the executors.
#[derive(Debug, Clone)]
pub struct Committer {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    view: u64,
    window: Window<CommitSlot>,
    view_obs: Observer,
    completion_obs: Observer,
    report: Option<(Arc<HistoryReport>, Millis)>,
    settled: bool,
}

impl Committer {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let t = cfg.thresholds;
        Committer {
            id,
            window: Window::new(cfg.window),
            view_obs: Observer::new(t.observer(ControlLoop::View)),
            completion_obs: Observer::new(t.observer(ControlLoop::Completion)),
            cfg,
            view: 0,
            report: None,
            settled: true,
        }
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn accepted(&self, seq: u64) -> Option<&SlotEntry> {
        self.window.get(seq).and_then(|s| s.accepted.as_ref())
    }

    pub fn history(&self) -> HistoryReport {
        HistoryReport {
            view: self.view,
            low: self.window.low(),
            entries: self
                .window
                .iter()
                .filter_map(|(_, s)| s.accepted.clone())
                .collect(),
        }
    }

    fn accept(&mut self, e: SlotEntry, now: Millis, out: &mut Outbox) {
        let Some(slot) = self.window.get_mut(e.seq) else {
            return;
        };
        slot.accepted = Some(e.clone());
        slot.last_sent = now;
        self.settled = true;
        out.send(Dest::Cluster(ClusterRole::Executor), Body::Confirm(e));
    }

    fn fresh_for_view(&self, seq: u64) -> bool {
        self.window
            .get(seq)
            .is_none_or(|s| s.accepted.as_ref().is_none_or(|a| a.view < self.view))
    }

    /// Direct proposal from the leader (no preparers installed).
    pub fn on_proposal(&mut self, from: ReplicaId, e: &SlotEntry, now: Millis, out: &mut Outbox) {
        if e.view != self.view
            || from.index != self.cfg.leader(e.view)
            || !self.window.in_range(e.seq)
            || !self.fresh_for_view(e.seq)
        {
            return;
        }
        let auth = self.cfg.auth.as_ref();
        if !value_is_sealed(auth, &e.value)
            || !proof_is_valid(auth, self.cfg.proposers(), e.coords(), &e.value, e.proof)
        {
            return;
        }
        let _ = self.window.entry_or_insert_with(e.seq, CommitSlot::default);
        self.accept(e.clone(), now, out);
    }

    /// Opinion from a preparer; accepted on a matching quorum.
    pub fn on_prepare(&mut self, from: ReplicaId, e: &SlotEntry, now: Millis, out: &mut Outbox) {
        if e.view != self.view || !self.fresh_for_view(e.seq) {
            return;
        }
        let Ok(slot) = self.window.entry_or_insert_with(e.seq, CommitSlot::default) else {
            return;
        };
        slot.prepares.entry(from.index).or_insert_with(|| e.clone());
        let keys: BTreeMap<u16, (u64, u64)> = slot.prepares.iter().map(|(k, p)| (*k, entry_key(p))).collect();
        match quorum_match(&keys, self.cfg.thresholds.prepare) {
            Ok(Some(key)) => {
                let chosen = slot
                    .prepares
                    .values()
                    .find(|p| entry_key(p) == key)
                    .cloned()
                    .expect("matched prepare");
                self.accept(chosen, now, out);
            }
            Ok(None) => {}
            Err(QuorumError::AmbiguousQuorum) => out.event(ProtocolEvent::Alarm {
                what: "ambiguous prepare quorum",
                seq: e.seq,
            }),
        }
    }

    fn enter_view(&mut self, view: u64, now: Millis, out: &mut Outbox) {
        if view <= self.view {
            return;
        }
        self.view = view;
        out.event(ProtocolEvent::ViewAdopted { view });
        for (_, s) in self.window.iter_mut() {
            s.prepares.clear();
        }
        let report = Arc::new(self.history());
        self.send_report(&report, out);
        self.report = Some((report, now));
        self.settled = false;
    }

    fn send_report(&self, report: &Arc<HistoryReport>, out: &mut Outbox) {
        if self.cfg.features.agreement_stage {
            out.send(Dest::Cluster(ClusterRole::Conservator), Body::Evidence(report.clone()));
        } else {
            out.send(Dest::Cluster(ClusterRole::Proposer), Body::History(report.clone()));
        }
    }
}

impl Role for Committer {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Proposal(e) => self.on_proposal(env.sender, e, now, out),
            Body::Prepare(e) => self.on_prepare(env.sender, e, now, out),
            Body::Notify { control, value } => {
                if crate::protocol::flows::loop_of(env.sender.cluster) != Some(*control) {
                    return;
                }
                match control {
                    ControlLoop::View => {
                        if let Some(v) = self.view_obs.observe(env.sender.index, *value) {
                            self.enter_view(v, now, out);
                        }
                    }
                    ControlLoop::Completion => {
                        if let Some(v) = self.completion_obs.observe(env.sender.index, *value) {
                            self.window.shift(checkpoint_floor(Progress::unpack(v).slots));
                        }
                    }
                    ControlLoop::Agreement => {}
                }
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        let period = self.cfg.timing.retransmit;
        for (_, s) in self.window.iter_mut() {
            if let Some(e) = &s.accepted {
                if now >= s.last_sent + period {
                    s.last_sent = now;
                    out.send(Dest::Cluster(ClusterRole::Executor), Body::Confirm(e.clone()));
                }
            }
        }
        if !self.settled {
            if let Some((report, last)) = &self.report {
                if now >= *last + self.cfg.timing.view_change_retransmit {
                    let report = report.clone();
                    self.send_report(&report, out);
                    self.report = Some((report, now));
                }
            }
        }
    }
}

/// Entries of a history report, for tests and tracing.
pub fn history_seqs(r: &HistoryReport) -> Vec<u64> {
    r.entries.iter().map(|e| e.seq).collect()
}
