use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt::Write;

use super::FaultDomain;
use crate::ids::ClusterRole;
use crate::protocol::flows::{message_flows, Flow};

/// Which cluster feeds which, derived from the implemented message flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<ClusterRole>,
    pub edges: BTreeSet<(ClusterRole, ClusterRole)>,
}

impl DependencyGraph {
    pub fn from_flows(flows: &[Flow]) -> Self {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for fl in flows {
            nodes.insert(fl.producer);
            nodes.insert(fl.consumer);
            edges.insert((fl.producer, fl.consumer));
        }
        DependencyGraph { nodes, edges }
    }

    pub fn for_stage(agreement_stage: bool) -> Self {
        Self::from_flows(&message_flows(agreement_stage))
    }

    pub fn producers_of(&self, consumer: ClusterRole) -> impl Iterator<Item = ClusterRole> + '_ {
        self.edges.iter().filter(move |(_, c)| *c == consumer).map(|(p, _)| *p)
    }

    /// Graphviz rendering, for inspection.
    pub fn to_dot(&self, domains: &BTreeMap<ClusterRole, FaultDomain>) -> String {
        let mut s = String::from("digraph clusters {\n");
        for n in &self.nodes {
            let d = domains.get(n).map_or("", |d| d.name());
            let _ = writeln!(s, "  \"{n}\" [domain=\"{d}\"];");
        }
        for (p, c) in &self.edges {
            let _ = writeln!(s, "  \"{p}\" -> \"{c}\";");
        }
        s.push_str("}\n");
        s
    }
}

/// Shell members are shell; anything else with an inbound edge from the
/// shell is a filter; the rest is core.
pub fn classify(graph: &DependencyGraph, shell: &BTreeSet<ClusterRole>) -> BTreeMap<ClusterRole, FaultDomain> {
    graph
        .nodes
        .iter()
        .map(|n| {
            let d = if shell.contains(n) {
                FaultDomain::Shell
            } else if graph.producers_of(*n).any(|p| shell.contains(&p)) {
                FaultDomain::Filter
            } else {
                FaultDomain::Core
            };
            (*n, d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailor::{adapt, Preset, ShellSelection};
    use proptest::prelude::*;
    use ClusterRole::*;

    /// Scans the flow table directly instead of going through the graph.
    fn oracle(stage: bool, shell: &BTreeSet<ClusterRole>, node: ClusterRole) -> FaultDomain {
        if shell.contains(&node) {
            return FaultDomain::Shell;
        }
        for fl in message_flows(stage) {
            if fl.consumer == node && shell.contains(&fl.producer) {
                return FaultDomain::Filter;
            }
        }
        FaultDomain::Core
    }

    fn domains(p: Preset) -> BTreeMap<ClusterRole, FaultDomain> {
        let a = adapt(&p.selection());
        classify(&DependencyGraph::for_stage(a.features.agreement_stage), &a.shell)
    }

    #[test]
    fn empty_shell_is_all_core() {
        let d = domains(Preset::Base);
        assert!(d.values().all(|d| *d == FaultDomain::Core));
    }

    #[test]
    fn minas_domains() {
        let d = domains(Preset::Minas);
        assert_eq!(d[&Proposer], FaultDomain::Filter);
        assert_eq!(d[&CompletionMonitor], FaultDomain::Filter);
        assert_eq!(d[&ViewMonitor], FaultDomain::Core);
        assert_eq!(d[&Committer], FaultDomain::Core);
    }

    #[test]
    fn sentry_domains() {
        let d = domains(Preset::Sentry);
        assert_eq!(d[&Preparer], FaultDomain::Filter);
        assert_eq!(d[&Auditor], FaultDomain::Filter);
        assert_eq!(d[&Curator], FaultDomain::Shell);
    }

    #[test]
    fn classification_matches_flow_scan_for_all_selections() {
        for m in 0..=255u8 {
            let a = adapt(&ShellSelection::from_mask(m));
            let stage = a.features.agreement_stage;
            let d = classify(&DependencyGraph::for_stage(stage), &a.shell);
            for (n, dom) in d {
                assert_eq!(dom, oracle(stage, &a.shell, n), "mask {m} node {n}");
            }
        }
    }

    fn rank(d: FaultDomain) -> u8 {
        match d {
            FaultDomain::Core => 0,
            FaultDomain::Filter => 1,
            FaultDomain::Shell => 2,
        }
    }

    proptest! {
        #[test]
        fn classify_is_monotone(a in any::<u8>(), b in any::<u8>()) {
            let small = ShellSelection::from_mask(a & b);
            let big = ShellSelection::from_mask(a | b);
            let ds = domains_of(&small);
            let db = domains_of(&big);
            for (n, d) in &ds {
                // clusters only present with the agreement stage count as core
                let other = db.get(n).copied().unwrap_or(FaultDomain::Core);
                prop_assert!(rank(other) >= rank(*d), "{n}: {d} -> {other}");
            }
        }
    }

    fn domains_of(s: &ShellSelection) -> BTreeMap<ClusterRole, FaultDomain> {
        let a = adapt(s);
        classify(&DependencyGraph::for_stage(a.features.agreement_stage), &a.shell)
    }
}
