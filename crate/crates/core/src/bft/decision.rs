//! Pure functions turning view-change evidence into a new-view decision.
//! Conservators, curators and auditors all run the same code so that an
//! auditor can recompute a curator's output exactly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::auth::{proof_is_valid, value_is_sealed, Authenticator};
use crate::envelope::{ConservatorReport, DecidedSlot, HistoryReport, NewViewDecision, SlotEntry};
use crate::protocol::proposer::entry_key;

fn genuine(e: &SlotEntry, proposers: u16, auth: &dyn Authenticator) -> bool {
    proof_is_valid(auth, proposers, e.coords(), &e.value, e.proof) && value_is_sealed(auth, &e.value)
}

/// Summarizes committer evidence and preparer reports for `view`.
///
/// Per slot the highest-view committer entry is taken. A preparer entry
/// replaces it if its view is higher and at least `prepared_support`
/// preparers reported the same entry.
pub fn conservator_report(
    view: u64,
    evidence: &[&HistoryReport],
    prepare_reports: &[&HistoryReport],
    prepared_support: usize,
    proposers: u16,
    auth: &dyn Authenticator,
) -> ConservatorReport {
    let start = evidence
        .iter()
        .chain(prepare_reports)
        .map(|r| r.low)
        .max()
        .unwrap_or(0);
    let mut best: BTreeMap<u64, SlotEntry> = BTreeMap::new();
    for r in evidence {
        for e in &r.entries {
            if e.seq < start || !genuine(e, proposers, auth) {
                continue;
            }
            if best.get(&e.seq).is_none_or(|b| e.view > b.view) {
                best.insert(e.seq, e.clone());
            }
        }
    }
    // (seq, view, key) -> reporters
    let mut support: BTreeMap<(u64, u64, (u64, u64)), (usize, &SlotEntry)> = BTreeMap::new();
    for r in prepare_reports {
        let mut seen = BTreeMap::new();
        for e in &r.entries {
            if e.seq < start || seen.insert(e.seq, ()).is_some() {
                continue;
            }
            support.entry((e.seq, e.view, entry_key(e))).or_insert((0, e)).0 += 1;
        }
    }
    for ((seq, view, _), (n, e)) in support {
        if n >= prepared_support
            && best.get(&seq).is_none_or(|b| view > b.view)
            && genuine(e, proposers, auth)
        {
            best.insert(seq, e.clone());
        }
    }
    ConservatorReport {
        view,
        start,
        entries: best.into_values().collect(),
    }
}

/// Builds the decision from the basis reports, given in basis order.
///
/// The start is the largest reported start. Per slot the highest-view entry
/// wins, ties going to the earlier report; slots nobody reported become
/// no-ops.
pub fn build_decision(
    view: u64,
    basis: &[(u16, &ConservatorReport)],
    proposers: u16,
    auth: &dyn Authenticator,
) -> NewViewDecision {
    let start = basis.iter().map(|(_, r)| r.start).max().unwrap_or(0);
    let mut best: BTreeMap<u64, &SlotEntry> = BTreeMap::new();
    for (_, r) in basis {
        for e in &r.entries {
            if e.seq < start || e.view >= view || !genuine(e, proposers, auth) {
                continue;
            }
            if best.get(&e.seq).is_none_or(|b| e.view > b.view) {
                best.insert(e.seq, e);
            }
        }
    }
    let end = best.keys().next_back().map_or(start, |s| s + 1);
    let slots = (start..end)
        .map(|s| match best.get(&s) {
            Some(e) => DecidedSlot {
                value: e.value.clone(),
                from_view: Some(e.view),
            },
            None => DecidedSlot {
                value: None,
                from_view: None,
            },
        })
        .collect();
    NewViewDecision {
        view,
        basis: basis.iter().map(|(i, _)| *i).collect(),
        start,
        slots,
    }
}

/// Checks that `decision` is exactly what the basis reports yield.
pub fn audit(
    decision: &NewViewDecision,
    reports: &BTreeMap<u16, &ConservatorReport>,
    basis_size: usize,
    conservators: u16,
    proposers: u16,
    auth: &dyn Authenticator,
) -> AuditOutcome {
    let mut distinct: Vec<u16> = decision.basis.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if decision.basis.len() != basis_size
        || distinct.len() != basis_size
        || distinct.iter().any(|i| *i >= conservators)
    {
        return AuditOutcome::Invalid;
    }
    let mut basis = Vec::with_capacity(basis_size);
    for i in &decision.basis {
        match reports.get(i) {
            Some(r) => basis.push((*i, *r)),
            None => return AuditOutcome::Incomplete,
        }
    }
    let expected = build_decision(decision.view, &basis, proposers, auth);
    if expected == *decision {
        AuditOutcome::Valid
    } else {
        AuditOutcome::Invalid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditOutcome {
    Valid,
    Invalid,
    /// Some basis reports have not arrived yet.
    Incomplete,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::KeyedFnv;
    use crate::ids::ClusterRole;
    use crate::protocol::testkit::*;
    use alloc::vec;

    fn hist(low: u64, entries: Vec<SlotEntry>) -> HistoryReport {
        HistoryReport { view: 2, low, entries }
    }

    #[test]
    fn conservator_prefers_supported_higher_view_prepares() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let auth = KeyedFnv::default();
        let x = entry(&cfg, 0, 4, Some(command(&cfg, 0, 0, 0)));
        let y = entry(&cfg, 1, 4, Some(command(&cfg, 0, 1, 0)));
        let ev = [hist(0, vec![x.clone()]), hist(0, vec![])];
        let lone = [hist(0, vec![y.clone()]), hist(0, vec![]), hist(0, vec![])];
        let ev_refs: Vec<&HistoryReport> = ev.iter().collect();
        let lone_refs: Vec<&HistoryReport> = lone.iter().collect();
        let r = conservator_report(2, &ev_refs, &lone_refs, 2, cfg.proposers(), &auth);
        assert_eq!(r.entries, [x]);
        let two = [hist(0, vec![y.clone()]), hist(0, vec![y.clone()]), hist(0, vec![])];
        let two_refs: Vec<&HistoryReport> = two.iter().collect();
        let r = conservator_report(2, &ev_refs, &two_refs, 2, cfg.proposers(), &auth);
        assert_eq!(r.entries, [y]);
    }

    #[test]
    fn conservator_drops_entries_below_the_start_and_forged_ones() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let auth = KeyedFnv::default();
        let old = entry(&cfg, 0, 3, None);
        let mut forged = entry(&cfg, 1, 20, None);
        forged.proof ^= 0xff;
        let ev = [hist(16, vec![old, forged]), hist(0, vec![])];
        let refs: Vec<&HistoryReport> = ev.iter().collect();
        let r = conservator_report(2, &refs, &[], 2, cfg.proposers(), &auth);
        assert_eq!(r.start, 16);
        assert!(r.entries.is_empty());
    }

    #[test]
    fn decision_fills_gaps_and_ties_go_to_earlier_reports() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let auth = KeyedFnv::default();
        let a = entry(&cfg, 0, 2, Some(command(&cfg, 0, 0, 0)));
        let b = entry(&cfg, 0, 2, Some(command(&cfg, 1, 0, 0)));
        let r0 = ConservatorReport { view: 3, start: 0, entries: vec![b.clone()] };
        let r1 = ConservatorReport { view: 3, start: 0, entries: vec![a] };
        let d = build_decision(3, &[(1, &r0), (0, &r1)], cfg.proposers(), &auth);
        assert_eq!(d.basis, [1, 0]);
        assert_eq!(d.end(), 3);
        assert_eq!(d.slot(2).unwrap().value, b.value);
        assert_eq!(d.slot(0).unwrap().from_view, None);
    }

    #[test]
    fn audit_catches_tampering_and_bad_bases() {
        let cfg = config(&[ClusterRole::Proposer], 1);
        let auth = KeyedFnv::default();
        let a = entry(&cfg, 0, 0, Some(command(&cfg, 0, 0, 0)));
        let r0 = ConservatorReport { view: 1, start: 0, entries: vec![a] };
        let r1 = ConservatorReport { view: 1, start: 0, entries: vec![] };
        let reports: BTreeMap<u16, &ConservatorReport> = [(0, &r0), (1, &r1)].into();
        let good = build_decision(1, &[(0, &r0), (1, &r1)], cfg.proposers(), &auth);
        let n = cfg.size(ClusterRole::Conservator);
        assert_eq!(audit(&good, &reports, 2, n, cfg.proposers(), &auth), AuditOutcome::Valid);
        let mut dropped = good.clone();
        dropped.slots[0].value = None;
        assert_eq!(audit(&dropped, &reports, 2, n, cfg.proposers(), &auth), AuditOutcome::Invalid);
        let mut dup = good.clone();
        dup.basis = vec![0, 0];
        assert_eq!(audit(&dup, &reports, 2, n, cfg.proposers(), &auth), AuditOutcome::Invalid);
        let mut missing = good.clone();
        missing.basis = vec![0, 2];
        assert_eq!(audit(&missing, &reports, 2, n, cfg.proposers(), &auth), AuditOutcome::Incomplete);
    }
}
