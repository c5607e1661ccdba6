//! Round-based execution of a single pattern instance.
//!
//! Every round each live node re-sends its current opinion, so "eventually"
//! becomes "within the last round". A crash at round `r` delivers that
//! round's messages only to the recipients in `reached`.

use alloc::vec;
use alloc::vec::Vec;

use super::{PatternInstance, PatternKind, Sym, Val, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Crash {
    pub round: u32,
    /// Bit mask over the recipients of the crash round.
    pub reached: u32,
}

impl Crash {
    fn sends(&self, round: u32, recipient: usize) -> bool {
        round < self.round || (round == self.round && self.reached & (1 << recipient) != 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeFault {
    Crash(Crash),
    /// Fixed per-recipient messages.
    Byzantine(Vec<Sym>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SourceInput {
    Correct(Sym),
    /// Reached only the relays in the mask before stopping.
    Crashed { value: Sym, reached: u32 },
    Byzantine(Vec<Sym>),
}

impl SourceInput {
    fn to(&self, relay: usize) -> Sym {
        match self {
            SourceInput::Correct(v) => *v,
            SourceInput::Crashed { value, reached } => value.filter(|_| reached & (1 << relay) != 0),
            SourceInput::Byzantine(vs) => vs.get(relay).copied().flatten(),
        }
    }

    pub fn is_byzantine(&self) -> bool {
        matches!(self, SourceInput::Byzantine(_))
    }
}

pub fn rounds(inst: &PatternInstance) -> u32 {
    inst.sources + inst.middle + inst.sinks + 2
}

/// The unique value with at least `t` matching reports, if any.
fn matching(reports: &[Sym], t: u32) -> Sym {
    let count = |v: Val| reports.iter().filter(|r| **r == Some(v)).count() as u32;
    [Val::V0, Val::V1].into_iter().find(|v| count(*v) >= t)
}

/// `source[i]` is what the source sends to recipient `i`: witnesses in the
/// Byzantine-tolerant variant, sinks otherwise. Returns each sink's value.
pub fn rdp_run(inst: &PatternInstance, source: &[Sym], witness_faults: &[(usize, NodeFault)]) -> Vec<Sym> {
    debug_assert_eq!(inst.kind, PatternKind::ReliableDistribution);
    let sinks = inst.sinks as usize;
    let sent = |i: usize| source.get(i).copied().flatten();
    if inst.variant == Variant::Cft {
        return (0..sinks).map(sent).collect();
    }
    let witnesses = inst.middle as usize;
    let fault = |w: usize| witness_faults.iter().find(|(i, _)| *i == w).map(|(_, f)| f);
    let mut reports = vec![vec![None; witnesses]; sinks];
    let mut accepted: Vec<Sym> = vec![None; sinks];
    for round in 0..rounds(inst) {
        for w in 0..witnesses {
            for (s, rep) in reports.iter_mut().enumerate() {
                let msg = match fault(w) {
                    None => sent(w),
                    Some(NodeFault::Crash(c)) => sent(w).filter(|_| c.sends(round, s)),
                    Some(NodeFault::Byzantine(vs)) => vs.get(s).copied().flatten(),
                };
                if msg.is_some() {
                    rep[w] = msg;
                }
            }
        }
        for (s, acc) in accepted.iter_mut().enumerate() {
            if acc.is_none() {
                *acc = matching(&reports[s], inst.sink_threshold);
            }
        }
    }
    accepted
}

/// Relays accept on `source_threshold` matching source inputs or adopt a
/// value forwarded by another relay; sinks accept on `sink_threshold`
/// matching relays. Relays only fail by crashing.
pub fn relay_run(inst: &PatternInstance, sources: &[SourceInput], relay_faults: &[(usize, Crash)]) -> Vec<Sym> {
    debug_assert_eq!(inst.kind, PatternKind::Relay);
    let relays = inst.middle as usize;
    let sinks = inst.sinks as usize;
    let crash = |r: usize| relay_faults.iter().find(|(i, _)| *i == r).map(|(_, c)| *c);

    let mut relay_value: Vec<Sym> = (0..relays)
        .map(|r| {
            let inputs: Vec<Sym> = sources.iter().map(|s| s.to(r)).collect();
            matching(&inputs, inst.source_threshold)
        })
        .collect();
    let mut reports = vec![vec![None; relays]; sinks];
    let mut accepted: Vec<Sym> = vec![None; sinks];

    for round in 0..rounds(inst) {
        // recipients of relay r: the other relays, then the sinks
        let mut next = relay_value.clone();
        for r in 0..relays {
            let Some(v) = relay_value[r] else { continue };
            let sends = |recipient: usize| crash(r).is_none_or(|c| c.sends(round, recipient));
            let mut slot = 0;
            for (other, nv) in next.iter_mut().enumerate() {
                if other == r {
                    continue;
                }
                if sends(slot) && nv.is_none() {
                    *nv = Some(v);
                }
                slot += 1;
            }
            for (s, rep) in reports.iter_mut().enumerate() {
                if sends(relays - 1 + s) {
                    rep[r] = Some(v);
                }
            }
        }
        relay_value = next;
        for (s, acc) in accepted.iter_mut().enumerate() {
            if acc.is_none() {
                *acc = matching(&reports[s], inst.sink_threshold);
            }
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    const V: Sym = Some(Val::V0);
    const W: Sym = Some(Val::V1);

    #[test]
    fn bft_rdp_survives_a_crashed_witness() {
        let inst = PatternInstance::rdp_bft(1, 3);
        let out = rdp_run(&inst, &[V; 4], &[(2, NodeFault::Crash(Crash { round: 0, reached: 0 }))]);
        assert_eq!(out, [V; 3]);
    }

    #[test]
    fn split_source_reaches_no_sink_without_a_liar() {
        let inst = PatternInstance::rdp_bft(1, 2);
        let out = rdp_run(&inst, &[V, V, W, W], &[]);
        assert_eq!(out, [None, None]);
    }

    #[test]
    fn cft_rdp_delivers_directly() {
        let inst = PatternInstance::rdp_cft(1, 3);
        assert_eq!(rdp_run(&inst, &[V; 3], &[]), [V; 3]);
    }

    #[test]
    fn cft_relay_needs_two_matching_sources() {
        let inst = PatternInstance::relay_cft(1, 2);
        let src = [SourceInput::Correct(V), SourceInput::Correct(V), SourceInput::Correct(None)];
        assert_eq!(relay_run(&inst, &src, &[]), [V, V]);
    }

    #[test]
    fn bft_relay_ignores_a_lone_liar() {
        let inst = PatternInstance::relay_bft(1, 2);
        let mut src = vec![SourceInput::Correct(V); 3];
        src.push(SourceInput::Byzantine(vec![W; 3]));
        assert_eq!(relay_run(&inst, &src, &[]), [V, V]);
    }

    #[test]
    fn relay_propagation_reaches_the_rest() {
        // only relay 0 sees enough inputs; it tells relay 1 and sink 0, then crashes
        let inst = PatternInstance::relay_cft(1, 2);
        let src = [
            SourceInput::Crashed { value: V, reached: 0b001 },
            SourceInput::Correct(V),
            SourceInput::Correct(W),
        ];
        // recipients of relay 0: relay 1, relay 2, sink 0, sink 1
        let out = relay_run(&inst, &src, &[(0, Crash { round: 0, reached: 0b0101 })]);
        assert_eq!(out, [V, V]);
    }
}
