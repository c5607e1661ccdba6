use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use super::decision::{audit, AuditOutcome};
use crate::envelope::{Body, ConservatorReport, Envelope, NewViewDecision};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::protocol::{Dest, Outbox, ProtocolConfig, Role};

#[derive(Debug, Clone)]
enum Verdict {
    Voucher(Arc<NewViewDecision>),
    Rejection(u64),
}

/// Recomputes the curator's decision and vouches for it or rejects the view.
#[derive(Debug, Clone)]
pub struct Auditor {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    reports: BTreeMap<u64, BTreeMap<u16, Arc<ConservatorReport>>>,
    decisions: BTreeMap<u64, Arc<NewViewDecision>>,
    verdict: Option<(u64, Verdict, Millis)>,
}

impl Auditor {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        Auditor {
            id,
            cfg,
            reports: BTreeMap::new(),
            decisions: BTreeMap::new(),
            verdict: None,
        }
    }

    pub fn audited_view(&self) -> Option<u64> {
        self.verdict.as_ref().map(|(v, _, _)| *v)
    }

    pub fn vouched(&self) -> Option<&Arc<NewViewDecision>> {
        match &self.verdict {
            Some((_, Verdict::Voucher(d), _)) => Some(d),
            _ => None,
        }
    }

    fn closed(&self, view: u64) -> bool {
        self.audited_view().is_some_and(|v| view <= v)
    }

    fn emit(&self, v: &Verdict, out: &mut Outbox) {
        match v {
            Verdict::Voucher(d) => out.send(Dest::Cluster(ClusterRole::RecordKeeper), Body::Voucher(d.clone())),
            Verdict::Rejection(view) => {
                out.send(Dest::Cluster(ClusterRole::Controller), Body::Rejection { view: *view })
            }
        }
    }

    fn try_audit(&mut self, view: u64, now: Millis, out: &mut Outbox) {
        let Some(d) = self.decisions.get(&view) else {
            return;
        };
        let empty = BTreeMap::new();
        let reports: BTreeMap<u16, &ConservatorReport> = self
            .reports
            .get(&view)
            .unwrap_or(&empty)
            .iter()
            .map(|(k, r)| (*k, r.as_ref()))
            .collect();
        let cfg = &self.cfg;
        let verdict = match audit(
            d,
            &reports,
            cfg.thresholds.basis,
            cfg.size(ClusterRole::Conservator),
            cfg.proposers(),
            cfg.auth.as_ref(),
        ) {
            AuditOutcome::Incomplete => return,
            AuditOutcome::Valid => Verdict::Voucher(d.clone()),
            AuditOutcome::Invalid => Verdict::Rejection(view),
        };
        self.emit(&verdict, out);
        self.verdict = Some((view, verdict, now));
        self.reports = self.reports.split_off(&(view + 1));
        self.decisions = self.decisions.split_off(&(view + 1));
    }
}

impl Role for Auditor {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Basis(r) if !self.closed(r.view) => {
                self.reports.entry(r.view).or_default().entry(env.sender.index).or_insert_with(|| r.clone());
                self.try_audit(r.view, now, out);
            }
            Body::Decision(d) if !self.closed(d.view) && env.sender.index == self.cfg.curator(d.view) => {
                self.decisions.entry(d.view).or_insert_with(|| d.clone());
                self.try_audit(d.view, now, out);
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some((view, verdict, last)) = &self.verdict {
            if now >= *last + self.cfg.timing.view_change_retransmit {
                let (view, verdict) = (*view, verdict.clone());
                self.emit(&verdict, out);
                self.verdict = Some((view, verdict, now));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bft::decision::build_decision;
    use crate::protocol::testkit::*;
    use alloc::vec;

    #[test]
    fn vouches_for_a_faithful_decision_and_rejects_a_forged_one() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let x = entry(&cfg, 0, 0, Some(command(&cfg, 0, 0, 0)));
        let r0 = Arc::new(ConservatorReport { view: 1, start: 0, entries: vec![x] });
        let r1 = Arc::new(ConservatorReport { view: 1, start: 0, entries: vec![] });
        let good = build_decision(1, &[(0, &r0), (1, &r1)], cfg.proposers(), cfg.auth.as_ref());
        let mut forged = good.clone();
        forged.slots[0].value = None;

        for (d, vouch) in [(good, true), (forged, false)] {
            let mut a = Auditor::new(rid(ClusterRole::Auditor, 0), cfg.clone());
            let mut out = Outbox::new();
            a.on_message(&env(rid(ClusterRole::Curator, 1), Body::Decision(Arc::new(d))), 0, &mut out);
            a.on_message(&env(rid(ClusterRole::Conservator, 0), Body::Basis(r0.clone())), 0, &mut out);
            assert!(out.sends.is_empty());
            a.on_message(&env(rid(ClusterRole::Conservator, 1), Body::Basis(r1.clone())), 0, &mut out);
            if vouch {
                assert!(matches!(
                    sent_to(&out, Dest::Cluster(ClusterRole::RecordKeeper))[..],
                    [Body::Voucher(_)]
                ));
            } else {
                assert_eq!(
                    sent_to(&out, Dest::Cluster(ClusterRole::Controller)),
                    [&Body::Rejection { view: 1 }]
                );
            }
        }
    }

    #[test]
    fn decisions_from_the_wrong_curator_are_ignored() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let r0 = Arc::new(ConservatorReport { view: 1, start: 0, entries: vec![] });
        let d = build_decision(1, &[(0, &r0), (1, &r0)], cfg.proposers(), cfg.auth.as_ref());
        let mut a = Auditor::new(rid(ClusterRole::Auditor, 0), cfg.clone());
        let mut out = Outbox::new();
        a.on_message(&env(rid(ClusterRole::Curator, 0), Body::Decision(Arc::new(d))), 0, &mut out);
        a.on_message(&env(rid(ClusterRole::Conservator, 0), Body::Basis(r0.clone())), 0, &mut out);
        a.on_message(&env(rid(ClusterRole::Conservator, 1), Body::Basis(r0)), 0, &mut out);
        assert!(out.sends.is_empty());
    }
}
