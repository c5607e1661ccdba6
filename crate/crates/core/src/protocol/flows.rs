//! Every message flow between clusters, with the acceptance rule the
//! consumer applies to it. The dependency graph used for tailoring is derived
//! from this table.

use alloc::vec::Vec;

use crate::envelope::{ControlLoop, MessageKind};
use crate::ids::ClusterRole;
use crate::linear::Linear;

use ClusterRole::*;

/// How a consumer turns inputs of one flow into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Acceptance {
    /// The input is a request or a notification; nothing is aggregated.
    Trigger,
    /// At least this many distinct senders reported the same value.
    Match(Linear),
    /// The value at this rank among per-sender reported numbers.
    Rank(Linear),
    /// At least this many distinct senders reported at all.
    Count(Linear),
}

impl Acceptance {
    pub fn threshold(self) -> Option<Linear> {
        match self {
            Acceptance::Trigger => None,
            Acceptance::Match(l) | Acceptance::Rank(l) | Acceptance::Count(l) => Some(l),
        }
    }

    pub fn with_threshold(self, l: Linear) -> Acceptance {
        match self {
            Acceptance::Trigger => Acceptance::Trigger,
            Acceptance::Match(_) => Acceptance::Match(l),
            Acceptance::Rank(_) => Acceptance::Rank(l),
            Acceptance::Count(_) => Acceptance::Count(l),
        }
    }

    pub fn rule_name(self) -> &'static str {
        match self {
            Acceptance::Trigger => "trigger",
            Acceptance::Match(_) => "match",
            Acceptance::Rank(_) => "rank",
            Acceptance::Count(_) => "count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flow {
    pub producer: ClusterRole,
    pub consumer: ClusterRole,
    pub kind: MessageKind,
    pub acceptance: Acceptance,
}

const fn flow(producer: ClusterRole, consumer: ClusterRole, kind: MessageKind, acceptance: Acceptance) -> Flow {
    Flow {
        producer,
        consumer,
        kind,
        acceptance,
    }
}

pub fn monitor_of(control: ControlLoop) -> ClusterRole {
    match control {
        ControlLoop::Agreement => AgreementMonitor,
        ControlLoop::Completion => CompletionMonitor,
        ControlLoop::View => ViewMonitor,
    }
}

pub fn loop_of(monitor: ClusterRole) -> Option<ControlLoop> {
    match monitor {
        AgreementMonitor => Some(ControlLoop::Agreement),
        CompletionMonitor => Some(ControlLoop::Completion),
        ViewMonitor => Some(ControlLoop::View),
        _ => None,
    }
}

pub fn loop_sources(control: ControlLoop) -> ClusterRole {
    match control {
        ControlLoop::Agreement | ControlLoop::Completion => Executor,
        ControlLoop::View => Controller,
    }
}

/// Clusters hosting an observer of the given loop.
pub fn observer_hosts(control: ControlLoop, agreement_stage: bool) -> Vec<ClusterRole> {
    let mut hosts = match control {
        ControlLoop::Agreement => alloc::vec![Proposer],
        ControlLoop::Completion => alloc::vec![Proposer, Committer, Executor, Controller],
        ControlLoop::View => alloc::vec![Proposer, Committer, Controller],
    };
    if agreement_stage && control != ControlLoop::Agreement {
        hosts.push(Preparer);
    }
    hosts
}

/// All flows of the protocol. `agreement_stage` selects the equivocation-
/// resilient agreement stage installed when the proposer is in the shell.
pub fn message_flows(agreement_stage: bool) -> Vec<Flow> {
    use Acceptance::*;
    use MessageKind as K;
    let one = Linear::ONE;
    let f1 = Linear::F1;
    let f2 = Linear::F2_1;
    let mut v = alloc::vec![
        flow(Client, FrontEnd, K::Request, Trigger),
        flow(FrontEnd, FrontEnd, K::Gossip, Trigger),
        flow(FrontEnd, Proposer, K::Offer, Trigger),
        flow(FrontEnd, Controller, K::SubmissionProgress, Rank(f1)),
        flow(Committer, Executor, K::Confirm, Match(f1)),
        flow(Executor, Client, K::Reply, Match(one)),
        flow(Client, Executor, K::FetchReply, Trigger),
        flow(Executor, Executor, K::CheckpointRequest, Trigger),
        flow(Executor, Executor, K::Checkpoint, Match(one)),
    ];
    for control in ControlLoop::ALL {
        let m = monitor_of(control);
        v.push(flow(loop_sources(control), m, K::Report, Rank(f1)));
        v.push(flow(m, m, K::Forward, Rank(one)));
        for host in observer_hosts(control, agreement_stage) {
            v.push(flow(m, host, K::Notify, Rank(f1)));
        }
    }
    if agreement_stage {
        v.extend([
            flow(Proposer, Preparer, K::Proposal, Match(one)),
            flow(Preparer, Committer, K::Prepare, Match(f2)),
            flow(Committer, Conservator, K::Evidence, Count(f1)),
            flow(Preparer, Conservator, K::PrepareReport, Count(f2)),
            flow(Conservator, Curator, K::Basis, Count(f1)),
            flow(Conservator, Auditor, K::Basis, Count(f1)),
            flow(Curator, Auditor, K::Decision, Match(one)),
            flow(Auditor, RecordKeeper, K::Voucher, Match(f2)),
            flow(Auditor, Controller, K::Rejection, Trigger),
            flow(RecordKeeper, Proposer, K::NewView, Match(f1)),
            flow(RecordKeeper, Preparer, K::NewView, Match(f1)),
        ]);
    } else {
        v.extend([
            flow(Proposer, Committer, K::Proposal, Match(one)),
            flow(Committer, Proposer, K::History, Count(f1)),
        ]);
    }
    v.sort();
    v
}
