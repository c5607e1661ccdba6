use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::decision::conservator_report;
use crate::envelope::{Body, ConservatorReport, Envelope, HistoryReport};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::protocol::{Dest, Outbox, ProtocolConfig, Role};

#[derive(Debug, Clone, Default)]
struct ViewInputs {
    evidence: BTreeMap<u16, Arc<HistoryReport>>,
    prepares: BTreeMap<u16, Arc<HistoryReport>>,
}

/// Collects what committers and preparers accepted before a view change and
/// condenses it into one report.
#[derive(Debug, Clone)]
pub struct Conservator {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    inputs: BTreeMap<u64, ViewInputs>,
    sent: Option<(Arc<ConservatorReport>, Millis)>,
}

impl Conservator {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        Conservator {
            id,
            cfg,
            inputs: BTreeMap::new(),
            sent: None,
        }
    }

    pub fn latest(&self) -> Option<&Arc<ConservatorReport>> {
        self.sent.as_ref().map(|(r, _)| r)
    }

    fn done_view(&self) -> Option<u64> {
        self.sent.as_ref().map(|(r, _)| r.view)
    }

    fn send(&self, r: &Arc<ConservatorReport>, out: &mut Outbox) {
        out.send(Dest::Cluster(ClusterRole::Curator), Body::Basis(r.clone()));
        out.send(Dest::Cluster(ClusterRole::Auditor), Body::Basis(r.clone()));
    }

    fn try_report(&mut self, view: u64, now: Millis, out: &mut Outbox) {
        let t = self.cfg.thresholds;
        let Some(inputs) = self.inputs.get(&view) else {
            return;
        };
        if inputs.evidence.len() < t.evidence || inputs.prepares.len() < t.prepare_report {
            return;
        }
        let evidence: Vec<&HistoryReport> = inputs.evidence.values().map(|r| r.as_ref()).collect();
        let prepares: Vec<&HistoryReport> = inputs.prepares.values().map(|r| r.as_ref()).collect();
        let report = Arc::new(conservator_report(
            view,
            &evidence,
            &prepares,
            t.prepared_support,
            self.cfg.proposers(),
            self.cfg.auth.as_ref(),
        ));
        self.send(&report, out);
        self.sent = Some((report, now));
        self.inputs = self.inputs.split_off(&(view + 1));
    }

    fn accept(&mut self, env: &Envelope, r: &Arc<HistoryReport>, now: Millis, out: &mut Outbox) {
        if self.done_view().is_some_and(|v| r.view <= v) {
            return;
        }
        let inputs = self.inputs.entry(r.view).or_default();
        let map = if env.sender.cluster == ClusterRole::Committer {
            &mut inputs.evidence
        } else {
            &mut inputs.prepares
        };
        map.entry(env.sender.index).or_insert_with(|| r.clone());
        self.try_report(r.view, now, out);
    }
}

impl Role for Conservator {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Evidence(r) | Body::PrepareReport(r) => self.accept(env, r, now, out),
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some((r, last)) = &self.sent {
            if now >= *last + self.cfg.timing.view_change_retransmit {
                let r = r.clone();
                self.send(&r, out);
                self.sent = Some((r, now));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::testkit::*;

    #[test]
    fn reports_once_both_thresholds_are_met() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let mut c = Conservator::new(rid(ClusterRole::Conservator, 0), cfg.clone());
        let mut out = Outbox::new();
        let x = entry(&cfg, 0, 0, Some(command(&cfg, 0, 0, 0)));
        let h = |entries| Arc::new(HistoryReport { view: 1, low: 0, entries });
        for i in 0..2 {
            c.on_message(&env(rid(ClusterRole::Committer, i), Body::Evidence(h(alloc::vec![x.clone()]))), 0, &mut out);
        }
        assert!(out.sends.is_empty());
        for i in 0..3 {
            c.on_message(&env(rid(ClusterRole::Preparer, i), Body::PrepareReport(h(Vec::new()))), 0, &mut out);
        }
        assert_eq!(out.sends.len(), 2);
        assert_eq!(c.latest().unwrap().entries, [x]);
        c.on_message(&env(rid(ClusterRole::Preparer, 3), Body::PrepareReport(h(Vec::new()))), 0, &mut out);
        assert_eq!(out.sends.len(), 2);
    }
}
