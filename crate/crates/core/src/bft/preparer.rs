use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::auth::{proof_is_valid, value_is_sealed};
use crate::command::{value_digest, Digest};
use crate::envelope::{Body, ControlLoop, Envelope, HistoryReport, NewViewDecision, Progress, SlotEntry};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::protocol::flows::loop_of;
use crate::protocol::proposer::entry_key;
use crate::protocol::{Dest, Observer, Outbox, ProtocolConfig, ProtocolEvent, Role};
use crate::quorum::quorum_match;
use crate::window::checkpoint_floor;

/// Relays the leader's first proposal per slot, so that an equivocating
/// leader cannot get two values past the committers.
#[derive(Debug, Clone)]
pub struct Preparer {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    view: u64,
    low: u64,
    view_obs: Observer,
    completion_obs: Observer,
    /// First proposal per slot in the current view.
    current: BTreeMap<u64, SlotEntry>,
    /// Highest-view prepared entry per slot.
    prepared: BTreeMap<u64, SlotEntry>,
    new_views: BTreeMap<u64, BTreeMap<u16, Arc<NewViewDecision>>>,
    decision: Option<Arc<NewViewDecision>>,
    deferred: Vec<(ReplicaId, SlotEntry)>,
    report: Option<(Arc<HistoryReport>, Millis)>,
}

impl Preparer {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let t = cfg.thresholds;
        Preparer {
            id,
            view_obs: Observer::new(t.observer(ControlLoop::View)),
            completion_obs: Observer::new(t.observer(ControlLoop::Completion)),
            cfg,
            view: 0,
            low: 0,
            current: BTreeMap::new(),
            prepared: BTreeMap::new(),
            new_views: BTreeMap::new(),
            decision: None,
            deferred: Vec::new(),
            report: None,
        }
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn prepared(&self, seq: u64) -> Option<&SlotEntry> {
        self.prepared.get(&seq)
    }

    fn ready(&self) -> bool {
        self.view == 0 || self.decision.as_ref().is_some_and(|d| d.view == self.view)
    }

    pub fn on_proposal(&mut self, from: ReplicaId, e: &SlotEntry, out: &mut Outbox) {
        if e.view != self.view
            || from.index != self.cfg.leader(e.view)
            || e.seq < self.low
            || e.seq >= self.low + self.cfg.window
        {
            return;
        }
        if let Some(first) = self.current.get(&e.seq) {
            if entry_key(first) == entry_key(e) {
                // leader retransmission; committers may have missed ours
                out.send(Dest::Cluster(ClusterRole::Committer), Body::Prepare(first.clone()));
            } else {
                out.event(ProtocolEvent::Alarm {
                    what: "equivocating proposal",
                    seq: e.seq,
                });
            }
            return;
        }
        let auth = self.cfg.auth.as_ref();
        if !value_is_sealed(auth, &e.value) || !proof_is_valid(auth, self.cfg.proposers(), e.coords(), &e.value, e.proof) {
            return;
        }
        if !self.ready() {
            if self.deferred.len() < self.cfg.window as usize {
                self.deferred.push((from, e.clone()));
            }
            return;
        }
        if let Some(d) = self.decision.as_ref().filter(|d| d.view == self.view) {
            if e.seq < d.start {
                return;
            }
            if let Some(slot) = d.slot(e.seq) {
                if value_digest(&slot.value) != e.value_digest() {
                    out.event(ProtocolEvent::Alarm {
                        what: "proposal contradicts new-view decision",
                        seq: e.seq,
                    });
                    return;
                }
            }
        }
        self.current.insert(e.seq, e.clone());
        self.prepared.insert(e.seq, e.clone());
        out.send(Dest::Cluster(ClusterRole::Committer), Body::Prepare(e.clone()));
    }

    fn history(&self) -> HistoryReport {
        HistoryReport {
            view: self.view,
            low: self.low,
            entries: self.prepared.values().cloned().collect(),
        }
    }

    fn enter_view(&mut self, view: u64, now: Millis, out: &mut Outbox) {
        if view <= self.view {
            return;
        }
        self.view = view;
        out.event(ProtocolEvent::ViewAdopted { view });
        self.current.clear();
        self.deferred.clear();
        self.new_views = self.new_views.split_off(&view);
        let report = Arc::new(self.history());
        out.send(Dest::Cluster(ClusterRole::Conservator), Body::PrepareReport(report.clone()));
        self.report = Some((report, now));
        self.try_decide(out);
    }

    fn try_decide(&mut self, out: &mut Outbox) {
        if self.ready() {
            return;
        }
        let Some(reports) = self.new_views.get(&self.view) else {
            return;
        };
        let digests: BTreeMap<u16, Digest> = reports.iter().map(|(k, d)| (*k, d.digest())).collect();
        let Ok(Some(d)) = quorum_match(&digests, self.cfg.thresholds.new_view) else {
            return;
        };
        let decision = reports.values().find(|r| r.digest() == d).cloned().expect("matched decision");
        self.decision = Some(decision);
        self.report = None;
        for (from, e) in core::mem::take(&mut self.deferred) {
            self.on_proposal(from, &e, out);
        }
    }
}

impl Role for Preparer {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Proposal(e) => self.on_proposal(env.sender, e, out),
            Body::NewView(d) => {
                if d.view >= self.view && d.view > 0 {
                    self.new_views.entry(d.view).or_default().insert(env.sender.index, d.clone());
                    self.try_decide(out);
                }
            }
            Body::Notify { control, value } if loop_of(env.sender.cluster) == Some(*control) => match control {
                ControlLoop::View => {
                    if let Some(v) = self.view_obs.observe(env.sender.index, *value) {
                        self.enter_view(v, now, out);
                    }
                }
                ControlLoop::Completion => {
                    if let Some(v) = self.completion_obs.observe(env.sender.index, *value) {
                        let low = checkpoint_floor(Progress::unpack(v).slots);
                        if low > self.low {
                            self.low = low;
                            self.current = self.current.split_off(&low);
                            self.prepared = self.prepared.split_off(&low);
                        }
                    }
                }
                ControlLoop::Agreement => {}
            },
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some((report, last)) = &self.report {
            if now >= *last + self.cfg.timing.view_change_retransmit {
                let report = report.clone();
                out.send(Dest::Cluster(ClusterRole::Conservator), Body::PrepareReport(report.clone()));
                self.report = Some((report, now));
            }
        }
    }
}
