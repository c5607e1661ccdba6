//! Adversarial wrappers. A Byzantine replica runs the correct state machine
//! and rewrites what it sends; it always sends under its own identity.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::faults::FaultKind;
use crate::auth::proposal_proof;
use crate::command::{Command, CommandId};
use crate::envelope::{Body, DecidedSlot, HistoryReport, NewViewDecision, SlotEntry};
use crate::ids::ReplicaId;
use crate::kv::Fields;
use crate::protocol::ProtocolConfig;
use crate::state::ExecState;

#[derive(Debug, Clone)]
pub struct Adversary {
    me: ReplicaId,
    kinds: BTreeSet<FaultKind>,
    rng: ChaCha8Rng,
}

impl Adversary {
    pub fn new(me: ReplicaId, seed: u64) -> Self {
        Adversary {
            me,
            kinds: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn add(&mut self, kind: FaultKind) {
        self.kinds.insert(kind);
    }

    pub fn kinds(&self) -> &BTreeSet<FaultKind> {
        &self.kinds
    }

    /// What `to` receives instead of `body`; `None` keeps the original.
    pub fn rewrite(&mut self, cfg: &ProtocolConfig, to: ReplicaId, body: &Body) -> Option<Body> {
        let mut out: Option<Body> = None;
        let kinds: Vec<FaultKind> = self.kinds.iter().copied().collect();
        for kind in kinds {
            let current = out.as_ref().unwrap_or(body);
            if let Some(b) = self.apply(kind, cfg, to, current) {
                out = Some(b);
            }
        }
        out
    }

    fn apply(&mut self, kind: FaultKind, cfg: &ProtocolConfig, to: ReplicaId, body: &Body) -> Option<Body> {
        match kind {
            FaultKind::Crash => None,
            FaultKind::EquivocateProposals => {
                // the lower half of every recipient cluster sees another story
                if to.index >= cfg.size(to.cluster) / 2 {
                    return None;
                }
                match body {
                    Body::Proposal(e) => equivocate(cfg, self.me, e).map(Body::Proposal),
                    Body::Decision(d) => Some(Body::Decision(Arc::new(alter_decision(d)))),
                    _ => None,
                }
            }
            FaultKind::ForgeReply => match body {
                Body::Reply { id, result } => Some(Body::Reply {
                    id: *id,
                    result: forge_reply(*id, result),
                }),
                _ => None,
            },
            FaultKind::ForgeCheckpoint => match body {
                Body::Checkpoint { seq, state, .. } => {
                    let forged = forge_state(state);
                    Some(Body::Checkpoint {
                        seq: *seq,
                        digest: forged.digest(),
                        state: Arc::new(forged),
                    })
                }
                _ => None,
            },
            FaultKind::ForgeViewChangeReport => match body {
                Body::History(r) => Some(Body::History(Arc::new(forge_history(r)))),
                Body::Evidence(r) => Some(Body::Evidence(Arc::new(forge_history(r)))),
                Body::Basis(r) => {
                    let mut f = (**r).clone();
                    f.entries = forge_entries(&f.entries, f.view);
                    Some(Body::Basis(Arc::new(f)))
                }
                _ => None,
            },
            FaultKind::ArbitraryBytes => self.fuzz(body),
        }
    }

    fn fuzz(&mut self, body: &Body) -> Option<Body> {
        let rng = &mut self.rng;
        let garble = |c: &Command, rng: &mut ChaCha8Rng| {
            let mut p = c.payload.to_vec();
            if p.is_empty() {
                p.push(0);
            }
            let i = rng.random_range(0..p.len());
            p[i] ^= rng.random_range(1..=255u8);
            Command {
                payload: Arc::from(p),
                ..c.clone()
            }
        };
        Some(match body {
            Body::Request(c) => Body::Request(garble(c, rng)),
            Body::Gossip(c) => Body::Gossip(garble(c, rng)),
            Body::Offer(c) => Body::Offer(garble(c, rng)),
            Body::Proposal(e) | Body::Prepare(e) | Body::Confirm(e) => {
                let mut e = e.clone();
                match &e.value {
                    Some(c) => e.value = Some(garble(c, rng)),
                    None => e.proof ^= rng.random::<u64>() | 1,
                }
                match body {
                    Body::Proposal(_) => Body::Proposal(e),
                    Body::Prepare(_) => Body::Prepare(e),
                    _ => Body::Confirm(e),
                }
            }
            Body::Reply { id, .. } => {
                let len = rng.random_range(0..16);
                let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                Body::Reply {
                    id: *id,
                    result: Arc::from(bytes),
                }
            }
            Body::SubmissionProgress { .. } => Body::SubmissionProgress { count: rng.random() },
            Body::Report { control, .. } => Body::Report {
                control: *control,
                value: rng.random(),
            },
            Body::Forward { control, .. } => Body::Forward {
                control: *control,
                value: rng.random(),
            },
            Body::Notify { control, .. } => Body::Notify {
                control: *control,
                value: rng.random(),
            },
            Body::Checkpoint { seq, state, .. } => Body::Checkpoint {
                seq: *seq,
                digest: rng.random(),
                state: state.clone(),
            },
            Body::Rejection { view } => Body::Rejection {
                view: view.wrapping_add(rng.random_range(0..3)),
            },
            _ => return None,
        })
    }
}

fn equivocate(cfg: &ProtocolConfig, me: ReplicaId, e: &SlotEntry) -> Option<SlotEntry> {
    e.value.as_ref()?;
    let value = None;
    Some(SlotEntry {
        view: e.view,
        seq: e.seq,
        proof: proposal_proof(cfg.auth.as_ref(), me.index, e.coords(), &value),
        value,
    })
}

fn alter_decision(d: &NewViewDecision) -> NewViewDecision {
    let mut d = d.clone();
    d.slots.push(DecidedSlot {
        value: None,
        from_view: Some(d.view.saturating_sub(1)),
    });
    d
}

fn forge_reply(id: CommandId, result: &[u8]) -> Arc<[u8]> {
    let mut v = result.to_vec();
    v.push(0xf0 ^ (id.client as u8));
    Arc::from(v)
}

pub fn forge_state(state: &ExecState) -> ExecState {
    let mut forged = state.clone();
    let mut fields = Fields::new();
    fields.insert("forged".into(), Arc::from(&b"\xde\xad\xbe\xef"[..]));
    let key = forged
        .kv
        .keys()
        .next()
        .map(Into::into)
        .unwrap_or_else(|| alloc::string::String::from("forged"));
    forged.kv.corrupt(&key, fields);
    forged.kv.recompute_digest();
    forged
}

/// Entries that claim a later view with contents the leader never signed.
fn forge_entries(entries: &[SlotEntry], view: u64) -> Vec<SlotEntry> {
    let claimed = view.saturating_sub(1);
    let mut out: Vec<SlotEntry> = entries
        .iter()
        .map(|e| SlotEntry {
            view: claimed.max(e.view),
            seq: e.seq,
            value: None,
            proof: e.proof ^ 0x00ff,
        })
        .collect();
    let next = entries.iter().map(|e| e.seq + 1).max().unwrap_or(0);
    out.push(SlotEntry {
        view: claimed,
        seq: next,
        value: None,
        proof: 0,
    });
    out
}

fn forge_history(r: &HistoryReport) -> HistoryReport {
    HistoryReport {
        view: r.view,
        low: r.low,
        entries: forge_entries(&r.entries, r.view),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::proof_is_valid;
    use crate::ids::ClusterRole;
    use crate::protocol::testkit::*;

    #[test]
    fn equivocation_splits_the_cluster() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let mut adv = Adversary::new(rid(ClusterRole::Proposer, 0), 1);
        adv.add(FaultKind::EquivocateProposals);
        let e = entry(&cfg, 0, 3, Some(command(&cfg, 1, 0, 0)));
        let body = Body::Proposal(e.clone());
        let to = |i| rid(ClusterRole::Preparer, i);
        let changed: Vec<bool> = (0..4).map(|i| adv.rewrite(&cfg, to(i), &body).is_some()).collect();
        assert_eq!(changed, [true, true, false, false]);
        let Some(Body::Proposal(alt)) = adv.rewrite(&cfg, to(0), &body) else {
            panic!()
        };
        assert_ne!(alt.value, e.value);
        // the leader signs its lie, so the proof checks out
        assert!(proof_is_valid(cfg.auth.as_ref(), cfg.proposers(), alt.coords(), &alt.value, alt.proof));
    }

    #[test]
    fn forged_checkpoints_are_self_consistent() {
        let cfg = config(&[ClusterRole::Executor], 1);
        let mut adv = Adversary::new(rid(ClusterRole::Executor, 0), 1);
        adv.add(FaultKind::ForgeCheckpoint);
        let st = Arc::new(ExecState::new());
        let body = Body::Checkpoint { seq: 0, digest: st.digest(), state: st.clone() };
        let Some(Body::Checkpoint { digest, state, .. }) = adv.rewrite(&cfg, rid(ClusterRole::Executor, 1), &body) else {
            panic!()
        };
        assert_eq!(state.digest(), digest);
        assert_ne!(digest, st.digest());
    }

    #[test]
    fn forged_histories_fail_proof_checks() {
        let cfg = config(&[ClusterRole::Committer], 1);
        let e = entry(&cfg, 0, 0, Some(command(&cfg, 1, 0, 0)));
        let r = HistoryReport { view: 1, low: 0, entries: alloc::vec![e] };
        for f in forge_history(&r).entries {
            assert!(!proof_is_valid(cfg.auth.as_ref(), cfg.proposers(), f.coords(), &f.value, f.proof));
        }
    }
}
