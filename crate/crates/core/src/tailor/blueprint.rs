use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::deploy::{self, Deployment};
use super::graph::{classify, DependencyGraph};
use super::{FaultDomain, ShellSelection};
use crate::auth::Authenticator;
use crate::envelope::{ControlLoop, MessageKind};
use crate::ids::{ClusterRole, ReplicaId};
use crate::linear::Linear;
use crate::protocol::flows::{loop_sources, message_flows, monitor_of, Acceptance};
use crate::protocol::{CommitMatch, Features, ProtocolConfig, Thresholds, Timing};
use crate::window::WINDOW_CAPACITY;

pub const BLUEPRINT_VERSION: u32 = 1;

/// One cluster after the replacement step, before sizes are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptedCluster {
    pub role: ClusterRole,
    pub size: Linear,
    pub expanded: bool,
    pub replacement: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptedSystem {
    pub selection: ShellSelection,
    /// The selection plus clusters that join the shell with a replacement.
    pub shell: BTreeSet<ClusterRole>,
    pub features: Features,
    pub clusters: Vec<AdaptedCluster>,
}

fn base_size(role: ClusterRole) -> Linear {
    match role {
        ClusterRole::Proposer | ClusterRole::Curator => Linear::F1,
        ClusterRole::Preparer | ClusterRole::Auditor => Linear::F3_1,
        _ => Linear::F2_1,
    }
}

fn expandable(role: ClusterRole) -> bool {
    matches!(role, ClusterRole::Committer | ClusterRole::Executor) || role.is_monitor()
}

/// Applies the per-cluster replacements for the selected shell clusters.
pub fn adapt(sel: &ShellSelection) -> AdaptedSystem {
    use ClusterRole::*;
    let stage = sel.contains(Proposer);
    let mut shell: BTreeSet<ClusterRole> = sel.roles().collect();
    if stage {
        shell.insert(Curator);
    }
    let mut roles: Vec<ClusterRole> = ClusterRole::BASE.to_vec();
    if stage {
        roles.extend([Preparer, Conservator, Curator, Auditor, RecordKeeper]);
    }
    let clusters = roles
        .into_iter()
        .map(|role| {
            let in_shell = sel.contains(role);
            let expanded = in_shell && expandable(role);
            let replacement = match (role, in_shell) {
                (Proposer, true) => "agreement stage with preparers and curator-led view change",
                (Committer, true) => "expanded; adapted proposer view change; value-matching executors",
                (Executor, true) => "expanded; quorum client and checkpoint matching",
                (r, true) if r.is_monitor() => "expanded; Byzantine relay thresholds",
                (FrontEnd | Controller, true) => "unchanged",
                (Curator, _) if stage => "joins the shell",
                (Preparer | Conservator | Auditor | RecordKeeper, _) => "added by agreement stage",
                _ => "base",
            };
            let size = if expanded { Linear::F3_1 } else { base_size(role) };
            AdaptedCluster {
                role,
                size,
                expanded,
                replacement,
            }
        })
        .collect();
    AdaptedSystem {
        selection: sel.clone(),
        shell,
        features: Features {
            agreement_stage: stage,
            commit_match: if sel.contains(Committer) {
                CommitMatch::Value
            } else {
                CommitMatch::SlotOnly
            },
        },
        clusters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Trigger,
    Match,
    Rank,
    Count,
}

impl Rule {
    pub fn of(a: Acceptance) -> Rule {
        match a {
            Acceptance::Trigger => Rule::Trigger,
            Acceptance::Match(_) => Rule::Match,
            Acceptance::Rank(_) => Rule::Rank,
            Acceptance::Count(_) => Rule::Count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub role: ClusterRole,
    pub size: u16,
    pub formula: Linear,
    pub domain: FaultDomain,
    pub expanded: bool,
    pub replacement: String,
}

/// Acceptance rule of one input flow at its consumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub producer: ClusterRole,
    pub kind: MessageKind,
    pub consumer: ClusterRole,
    pub rule: Rule,
    pub base: Linear,
    pub threshold: Linear,
    pub value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub producer: ClusterRole,
    pub consumer: ClusterRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub replica: ReplicaId,
    pub label: String,
}

/// A complete tailored protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemBlueprint {
    pub version: u32,
    pub f: u32,
    pub shell_selection: Vec<ClusterRole>,
    pub features: Features,
    pub clusters: Vec<ClusterSpec>,
    pub inputs: Vec<InputSpec>,
    pub edges: Vec<Edge>,
    pub client_domain: FaultDomain,
    pub deployment: Deployment,
    pub labels: Vec<Label>,
}

pub const DEFAULT_LABEL: &str = "default";

/// Fixes sizes and thresholds and plans the deployment.
pub fn configure(
    adapted: &AdaptedSystem,
    graph: &DependencyGraph,
    domains: &BTreeMap<ClusterRole, FaultDomain>,
    f: u32,
) -> SystemBlueprint {
    let clusters: Vec<ClusterSpec> = adapted
        .clusters
        .iter()
        .map(|c| ClusterSpec {
            role: c.role,
            size: c.size.eval(f) as u16,
            formula: c.size,
            domain: domains[&c.role],
            expanded: c.expanded,
            replacement: c.replacement.to_string(),
        })
        .collect();
    let expanded: BTreeSet<ClusterRole> = adapted.clusters.iter().filter(|c| c.expanded).map(|c| c.role).collect();
    let inputs = message_flows(adapted.features.agreement_stage)
        .into_iter()
        .map(|fl| {
            let base = fl.acceptance.threshold().unwrap_or(Linear::ONE);
            let threshold = raised_threshold(fl.acceptance, expanded.contains(&fl.producer));
            InputSpec {
                producer: fl.producer,
                kind: fl.kind,
                consumer: fl.consumer,
                rule: Rule::of(fl.acceptance),
                base,
                threshold,
                value: threshold.eval(f),
            }
        })
        .collect();
    let deployment = deploy::plan(&clusters);
    let labels = deploy::labels(&clusters);
    SystemBlueprint {
        version: BLUEPRINT_VERSION,
        f,
        shell_selection: adapted.selection.roles().collect(),
        features: adapted.features,
        clusters,
        inputs,
        edges: graph
            .edges
            .iter()
            .map(|(p, c)| Edge {
                producer: *p,
                consumer: *c,
            })
            .collect(),
        client_domain: domains.get(&ClusterRole::Client).copied().unwrap_or(FaultDomain::Core),
        deployment,
        labels,
    }
}

fn raised_threshold(a: Acceptance, producer_expanded: bool) -> Linear {
    let base = a.threshold().unwrap_or(Linear::ONE);
    if producer_expanded && a != Acceptance::Trigger {
        base + Linear::F
    } else {
        base
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlueprintError {
    #[error("unsupported blueprint version {0}")]
    Version(u32),
    #[error("invalid shell selection: {0}")]
    Selection(String),
    #[error("cluster set differs from the tailored one: {0}")]
    Clusters(String),
    #[error("size of {role}: expected {expected}, found {found}")]
    Size { role: ClusterRole, expected: u64, found: u64 },
    #[error("domain of {role}: expected {expected}, found {found}")]
    Domain { role: ClusterRole, expected: FaultDomain, found: FaultDomain },
    #[error("input {0}")]
    Input(String),
    #[error("deployment: {0}")]
    Deployment(String),
    #[error("labels: {0}")]
    Labels(String),
}

impl SystemBlueprint {
    pub fn cluster(&self, role: ClusterRole) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| c.role == role)
    }

    pub fn size(&self, role: ClusterRole) -> u16 {
        self.cluster(role).map_or(0, |c| c.size)
    }

    pub fn domain(&self, role: ClusterRole) -> Option<FaultDomain> {
        if role == ClusterRole::Client {
            return Some(self.client_domain);
        }
        self.cluster(role).map(|c| c.domain)
    }

    pub fn input(&self, producer: ClusterRole, kind: MessageKind, consumer: ClusterRole) -> Option<&InputSpec> {
        self.inputs
            .iter()
            .find(|i| i.producer == producer && i.kind == kind && i.consumer == consumer)
    }

    pub fn threshold(&self, producer: ClusterRole, kind: MessageKind, consumer: ClusterRole) -> Option<u64> {
        self.input(producer, kind, consumer).map(|i| i.value)
    }

    pub fn selection(&self) -> Result<ShellSelection, super::TailorError> {
        ShellSelection::from_roles(self.shell_selection.iter().copied())
    }

    pub fn shell_clusters(&self) -> impl Iterator<Item = &ClusterSpec> {
        self.clusters.iter().filter(|c| c.domain == FaultDomain::Shell)
    }

    /// Every replica of every cluster, clients excluded.
    pub fn replicas(&self) -> impl Iterator<Item = ReplicaId> + '_ {
        self.clusters
            .iter()
            .flat_map(|c| (0..c.size).map(move |i| ReplicaId::new(c.role, i)))
    }

    pub fn label(&self, r: ReplicaId) -> Option<&str> {
        self.labels.iter().find(|l| l.replica == r).map(|l| l.label.as_str())
    }

    /// Checks every structural invariant against an independent
    /// recomputation from the shell selection.
    pub fn validate(&self) -> Result<(), BlueprintError> {
        if self.version != BLUEPRINT_VERSION {
            return Err(BlueprintError::Version(self.version));
        }
        let sel = self.selection().map_err(|e| BlueprintError::Selection(e.to_string()))?;
        let f = self.f;
        let stage = sel.contains(ClusterRole::Proposer);
        if self.features.agreement_stage != stage {
            return Err(BlueprintError::Selection("agreement stage flag does not match proposer selection".into()));
        }
        let flows = message_flows(stage);
        let graph = DependencyGraph::from_flows(&flows);
        let mut shell: BTreeSet<ClusterRole> = sel.roles().collect();
        if stage {
            shell.insert(ClusterRole::Curator);
        }
        let domains = classify(&graph, &shell);

        let expected_roles: BTreeSet<ClusterRole> = graph.nodes.iter().copied().filter(|r| *r != ClusterRole::Client).collect();
        let roles: BTreeSet<ClusterRole> = self.clusters.iter().map(|c| c.role).collect();
        if roles != expected_roles || roles.len() != self.clusters.len() {
            return Err(BlueprintError::Clusters(format!("{roles:?}")));
        }
        let mut expanded = BTreeSet::new();
        for c in &self.clusters {
            let exp = shell.contains(&c.role) && expandable(c.role);
            let want = if exp { Linear::F3_1 } else { base_size(c.role) };
            if c.expanded != exp || c.formula != want || u64::from(c.size) != want.eval(f) {
                return Err(BlueprintError::Size {
                    role: c.role,
                    expected: want.eval(f),
                    found: u64::from(c.size),
                });
            }
            if exp {
                expanded.insert(c.role);
            }
            if c.domain != domains[&c.role] {
                return Err(BlueprintError::Domain {
                    role: c.role,
                    expected: domains[&c.role],
                    found: c.domain,
                });
            }
        }
        if self.client_domain != domains[&ClusterRole::Client] {
            return Err(BlueprintError::Domain {
                role: ClusterRole::Client,
                expected: domains[&ClusterRole::Client],
                found: self.client_domain,
            });
        }

        if self.inputs.len() != flows.len() {
            return Err(BlueprintError::Input(format!("count {} != {}", self.inputs.len(), flows.len())));
        }
        for fl in &flows {
            let Some(i) = self.input(fl.producer, fl.kind, fl.consumer) else {
                return Err(BlueprintError::Input(format!("{} -{}-> {} missing", fl.producer, fl.kind, fl.consumer)));
            };
            let base = fl.acceptance.threshold().unwrap_or(Linear::ONE);
            let plus = if expanded.contains(&fl.producer) && fl.acceptance != Acceptance::Trigger {
                Linear::F
            } else {
                Linear::ZERO
            };
            let want = base + plus;
            if i.rule != Rule::of(fl.acceptance) || i.base != base || i.threshold != want || i.value != want.eval(f) {
                return Err(BlueprintError::Input(format!(
                    "{} -{}-> {}: expected {want}, found {}",
                    fl.producer, fl.kind, fl.consumer, i.threshold
                )));
            }
            let producers = if fl.producer == ClusterRole::Client { u64::MAX } else { u64::from(self.size(fl.producer)) };
            if i.value > producers {
                return Err(BlueprintError::Input(format!(
                    "{} -{}-> {}: threshold {} exceeds producer size",
                    fl.producer, fl.kind, fl.consumer, i.value
                )));
            }
        }
        let edges: BTreeSet<(ClusterRole, ClusterRole)> = self.edges.iter().map(|e| (e.producer, e.consumer)).collect();
        if edges != graph.edges || edges.len() != self.edges.len() {
            return Err(BlueprintError::Input("dependency edges differ from the flow table".into()));
        }

        deploy::validate(&self.deployment, &self.clusters).map_err(BlueprintError::Deployment)?;
        deploy::validate_labels(&self.labels, &self.clusters).map_err(BlueprintError::Labels)?;
        Ok(())
    }
}

impl ProtocolConfig {
    /// Protocol parameters for the replicas of a blueprint.
    pub fn from_blueprint(bp: &SystemBlueprint, auth: Arc<dyn Authenticator>) -> ProtocolConfig {
        use ClusterRole::*;
        use MessageKind as K;
        let t = |p, k, c| bp.threshold(p, k, c).unwrap_or(1).max(1) as usize;
        let per_loop = |g: &dyn Fn(ControlLoop) -> usize| {
            let mut a = [0; 3];
            for c in ControlLoop::ALL {
                a[c.index()] = g(c);
            }
            a
        };
        let thresholds = Thresholds {
            reply: t(Executor, K::Reply, Client),
            checkpoint: t(Executor, K::Checkpoint, Executor),
            confirm: t(Committer, K::Confirm, Executor),
            history: t(Committer, K::History, Proposer),
            submission: t(FrontEnd, K::SubmissionProgress, Controller),
            source: per_loop(&|c| t(loop_sources(c), K::Report, monitor_of(c))),
            forward: per_loop(&|c| t(monitor_of(c), K::Forward, monitor_of(c))),
            observer: per_loop(&|c| t(monitor_of(c), K::Notify, Proposer)),
            prepare: t(Preparer, K::Prepare, Committer),
            evidence: t(Committer, K::Evidence, Conservator),
            prepare_report: t(Preparer, K::PrepareReport, Conservator),
            basis: t(Conservator, K::Basis, Curator),
            voucher: t(Auditor, K::Voucher, RecordKeeper),
            new_view: t(RecordKeeper, K::NewView, Proposer),
            prepared_support: Linear::F1.eval(bp.f) as usize,
        };
        let mut sizes = [0u16; ClusterRole::COUNT];
        for c in &bp.clusters {
            sizes[c.role.index()] = c.size;
        }
        ProtocolConfig {
            f: bp.f,
            sizes,
            thresholds,
            features: bp.features,
            timing: Timing::default(),
            window: WINDOW_CAPACITY,
            auth,
            allowed: bp.inputs.iter().map(|i| (i.producer, i.kind, i.consumer)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailor::{tailor, Preset};

    #[test]
    fn minas_sizes_and_thresholds() {
        let bp = tailor(&Preset::Minas.selection(), 1);
        bp.validate().unwrap();
        assert_eq!(bp.size(ClusterRole::Executor), 4);
        assert_eq!(bp.size(ClusterRole::FrontEnd), 3);
        assert_eq!(bp.threshold(ClusterRole::Executor, MessageKind::Reply, ClusterRole::Client), Some(2));
        assert_eq!(bp.threshold(ClusterRole::Executor, MessageKind::Checkpoint, ClusterRole::Executor), Some(2));
        assert_eq!(
            bp.threshold(ClusterRole::Executor, MessageKind::Report, ClusterRole::CompletionMonitor),
            Some(3)
        );
        // front ends are in the shell but not expanded
        assert_eq!(
            bp.threshold(ClusterRole::FrontEnd, MessageKind::SubmissionProgress, ClusterRole::Controller),
            Some(2)
        );
        assert!(bp.cluster(ClusterRole::Preparer).is_none());
    }

    #[test]
    fn sentry_has_the_agreement_stage() {
        let bp = tailor(&Preset::Sentry.selection(), 1);
        bp.validate().unwrap();
        assert!(bp.features.agreement_stage);
        assert_eq!(bp.features.commit_match, CommitMatch::SlotOnly);
        assert_eq!(bp.size(ClusterRole::Preparer), 4);
        assert_eq!(bp.size(ClusterRole::Curator), 2);
        assert_eq!(bp.domain(ClusterRole::Curator), Some(FaultDomain::Shell));
        assert_eq!(bp.threshold(ClusterRole::Preparer, MessageKind::Prepare, ClusterRole::Committer), Some(3));
        assert_eq!(bp.threshold(ClusterRole::Proposer, MessageKind::Proposal, ClusterRole::Committer), None);
    }

    #[test]
    fn shell_committers_raise_downstream_thresholds() {
        let sel = ShellSelection::from_roles([ClusterRole::Committer]).unwrap();
        let bp = tailor(&sel, 1);
        bp.validate().unwrap();
        assert_eq!(bp.features.commit_match, CommitMatch::Value);
        assert_eq!(bp.threshold(ClusterRole::Committer, MessageKind::Confirm, ClusterRole::Executor), Some(3));
        assert_eq!(bp.threshold(ClusterRole::Committer, MessageKind::History, ClusterRole::Proposer), Some(3));
    }

    #[test]
    fn degenerate_f_zero() {
        for p in [Preset::Base, Preset::Minas, Preset::Sentry, Preset::MinasSentry] {
            let bp = tailor(&p.selection(), 0);
            bp.validate().unwrap();
            assert!(bp.clusters.iter().all(|c| c.size == 1));
            assert!(bp.inputs.iter().all(|i| i.value == 1));
        }
    }

    #[test]
    fn validation_rejects_tampering() {
        let good = tailor(&Preset::Minas.selection(), 1);
        let mut bad = good.clone();
        bad.clusters.iter_mut().find(|c| c.role == ClusterRole::Executor).unwrap().size = 3;
        assert!(matches!(bad.validate(), Err(BlueprintError::Size { .. })));
        let mut bad = good.clone();
        bad.inputs.iter_mut().find(|i| i.kind == MessageKind::Reply).unwrap().value = 1;
        assert!(matches!(bad.validate(), Err(BlueprintError::Input(_))));
        let mut bad = good.clone();
        bad.clusters.iter_mut().find(|c| c.role == ClusterRole::Proposer).unwrap().domain = FaultDomain::Core;
        assert!(matches!(bad.validate(), Err(BlueprintError::Domain { .. })));
        let mut bad = good;
        let m = bad.deployment.groups[0].machines[0].replicas.pop();
        bad.deployment.groups[1].machines[0].replicas.extend(m);
        assert!(matches!(bad.validate(), Err(BlueprintError::Deployment(_))));
    }

    #[test]
    fn every_selection_and_f_validates() {
        for f in 0..=2 {
            for m in 0..=255u8 {
                let bp = tailor(&ShellSelection::from_mask(m), f);
                if let Err(e) = bp.validate() {
                    panic!("mask {m} f {f}: {e}");
                }
            }
        }
    }

    #[test]
    fn config_mirrors_blueprint() {
        let bp = tailor(&Preset::MinasSentry.selection(), 1);
        let cfg = ProtocolConfig::from_blueprint(&bp, Arc::new(crate::auth::KeyedFnv::default()));
        assert_eq!(cfg.size(ClusterRole::Executor), 4);
        assert_eq!(cfg.thresholds.reply, 2);
        assert_eq!(cfg.thresholds.prepare, 3);
        assert_eq!(cfg.thresholds.source, [3, 3, 2]);
        assert_eq!(cfg.thresholds.observer, [2, 2, 2]);
        assert!(cfg.accepts(ClusterRole::Curator, MessageKind::Decision, ClusterRole::Auditor));
        assert!(!cfg.accepts(ClusterRole::Proposer, MessageKind::Proposal, ClusterRole::Committer));
    }
}
