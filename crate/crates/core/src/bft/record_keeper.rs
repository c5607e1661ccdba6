use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use crate::command::Digest;
use crate::envelope::{Body, Envelope, NewViewDecision};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::protocol::{Dest, Outbox, ProtocolConfig, Role};
use crate::quorum::quorum_match;

/// Stores vouched decisions and hands them to proposers and preparers.
#[derive(Debug, Clone)]
pub struct RecordKeeper {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    vouchers: BTreeMap<u64, BTreeMap<u16, Arc<NewViewDecision>>>,
    stored: Option<(Arc<NewViewDecision>, Millis)>,
}

impl RecordKeeper {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        RecordKeeper {
            id,
            cfg,
            vouchers: BTreeMap::new(),
            stored: None,
        }
    }

    pub fn stored(&self) -> Option<&Arc<NewViewDecision>> {
        self.stored.as_ref().map(|(d, _)| d)
    }

    fn push(&self, d: &Arc<NewViewDecision>, out: &mut Outbox) {
        out.send(Dest::Cluster(ClusterRole::Proposer), Body::NewView(d.clone()));
        out.send(Dest::Cluster(ClusterRole::Preparer), Body::NewView(d.clone()));
    }

    fn on_voucher(&mut self, from: u16, d: &Arc<NewViewDecision>, now: Millis, out: &mut Outbox) {
        if self.stored().is_some_and(|s| d.view <= s.view) {
            return;
        }
        let votes = self.vouchers.entry(d.view).or_default();
        votes.entry(from).or_insert_with(|| d.clone());
        let digests: BTreeMap<u16, Digest> = votes.iter().map(|(k, v)| (*k, v.digest())).collect();
        if let Ok(Some(digest)) = quorum_match(&digests, self.cfg.thresholds.voucher) {
            let chosen = votes.values().find(|v| v.digest() == digest).cloned().expect("matched voucher");
            self.push(&chosen, out);
            self.vouchers = self.vouchers.split_off(&(chosen.view + 1));
            self.stored = Some((chosen, now));
        }
    }
}

impl Role for RecordKeeper {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        if let Body::Voucher(d) = env.body.as_ref() {
            self.on_voucher(env.sender.index, d, now, out);
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some((d, last)) = &self.stored {
            if now >= *last + self.cfg.timing.view_change_retransmit {
                let d = d.clone();
                self.push(&d, out);
                self.stored = Some((d, now));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::testkit::*;

    #[test]
    fn stores_after_matching_vouchers() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let mut rk = RecordKeeper::new(rid(ClusterRole::RecordKeeper, 0), cfg.clone());
        let d = |start| {
            Arc::new(NewViewDecision {
                view: 1,
                basis: alloc::vec![0, 1],
                start,
                slots: alloc::vec::Vec::new(),
            })
        };
        let mut out = Outbox::new();
        rk.on_message(&env(rid(ClusterRole::Auditor, 0), Body::Voucher(d(0))), 0, &mut out);
        rk.on_message(&env(rid(ClusterRole::Auditor, 1), Body::Voucher(d(16))), 0, &mut out);
        rk.on_message(&env(rid(ClusterRole::Auditor, 2), Body::Voucher(d(0))), 0, &mut out);
        assert!(rk.stored().is_none());
        rk.on_message(&env(rid(ClusterRole::Auditor, 3), Body::Voucher(d(0))), 0, &mut out);
        assert_eq!(rk.stored().unwrap().start, 0);
        assert_eq!(out.sends.len(), 2);
    }
}
