use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::decision::build_decision;
use crate::envelope::{Body, ConservatorReport, Envelope, NewViewDecision};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::protocol::{Dest, Outbox, ProtocolConfig, ProtocolEvent, Role};

#[derive(Debug, Clone, Default)]
struct Arrivals {
    order: Vec<u16>,
    reports: BTreeMap<u16, Arc<ConservatorReport>>,
}

/// Builds the new-view decision in the views it is responsible for.
#[derive(Debug, Clone)]
pub struct Curator {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    pending: BTreeMap<u64, Arrivals>,
    decided: Option<(Arc<NewViewDecision>, Millis)>,
}

impl Curator {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        Curator {
            id,
            cfg,
            pending: BTreeMap::new(),
            decided: None,
        }
    }

    pub fn decision(&self) -> Option<&Arc<NewViewDecision>> {
        self.decided.as_ref().map(|(d, _)| d)
    }

    fn on_basis(&mut self, from: u16, r: &Arc<ConservatorReport>, now: Millis, out: &mut Outbox) {
        if self.cfg.curator(r.view) != self.id.index || self.decided.as_ref().is_some_and(|(d, _)| d.view >= r.view) {
            return;
        }
        let a = self.pending.entry(r.view).or_default();
        if a.reports.contains_key(&from) {
            return;
        }
        a.order.push(from);
        a.reports.insert(from, r.clone());
        let need = self.cfg.thresholds.basis;
        if a.order.len() < need {
            return;
        }
        let basis: Vec<(u16, &ConservatorReport)> = a.order[..need].iter().map(|i| (*i, a.reports[i].as_ref())).collect();
        let d = Arc::new(build_decision(r.view, &basis, self.cfg.proposers(), self.cfg.auth.as_ref()));
        out.event(ProtocolEvent::Decided {
            view: d.view,
            digest: d.digest(),
        });
        out.send(Dest::Cluster(ClusterRole::Auditor), Body::Decision(d.clone()));
        self.pending = self.pending.split_off(&(r.view + 1));
        self.decided = Some((d, now));
    }
}

impl Role for Curator {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        if let Body::Basis(r) = env.body.as_ref() {
            self.on_basis(env.sender.index, r, now, out);
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some((d, last)) = &self.decided {
            if now >= *last + self.cfg.timing.view_change_retransmit {
                let d = d.clone();
                out.send(Dest::Cluster(ClusterRole::Auditor), Body::Decision(d.clone()));
                self.decided = Some((d, now));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::testkit::*;

    fn basis(view: u64) -> Body {
        Body::Basis(Arc::new(ConservatorReport {
            view,
            start: 0,
            entries: Vec::new(),
        }))
    }

    #[test]
    fn responsible_curator_decides_on_first_reports() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let mut c = Curator::new(rid(ClusterRole::Curator, 1), cfg.clone());
        let mut out = Outbox::new();
        c.on_message(&env(rid(ClusterRole::Conservator, 2), basis(1)), 0, &mut out);
        assert!(c.decision().is_none());
        c.on_message(&env(rid(ClusterRole::Conservator, 0), basis(1)), 0, &mut out);
        assert_eq!(c.decision().unwrap().basis, [2, 0]);
        // view 3 belongs to curator 0
        c.on_message(&env(rid(ClusterRole::Conservator, 0), basis(3)), 0, &mut out);
        c.on_message(&env(rid(ClusterRole::Conservator, 1), basis(3)), 0, &mut out);
        assert_eq!(c.decision().unwrap().view, 1);
    }

    #[test]
    fn every_leader_meets_every_curator() {
        for f in 1..4 {
            let cfg = config(&[ClusterRole::Proposer], f);
            let (p, c) = (cfg.proposers(), cfg.size(ClusterRole::Curator));
            let pairs: alloc::collections::BTreeSet<(u16, u16)> =
                (0..u64::from(p * c)).map(|v| (cfg.leader(v), cfg.curator(v))).collect();
            assert_eq!(pairs.len(), usize::from(p * c));
        }
    }
}
