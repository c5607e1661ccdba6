//! Two-group machine placement and per-replica diversity labels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::blueprint::{ClusterSpec, Label, DEFAULT_LABEL};
use super::FaultDomain;
use crate::ids::ReplicaId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub id: u16,
    pub replicas: Vec<ReplicaId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineGroup {
    pub name: String,
    pub shell: bool,
    pub machines: Vec<Machine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deployment {
    pub groups: Vec<MachineGroup>,
}

impl Deployment {
    pub fn machine_of(&self, r: ReplicaId) -> Option<u16> {
        self.groups
            .iter()
            .flat_map(|g| &g.machines)
            .find(|m| m.replicas.contains(&r))
            .map(|m| m.id)
    }

    pub fn machine_count(&self) -> usize {
        self.groups.iter().map(|g| g.machines.len()).sum()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.machines.len()).collect()
    }
}

/// Shell clusters go to one group of machines, all other clusters to the
/// other. Within a group replica `i` of every cluster lands on machine `i`,
/// so a group needs as many machines as its largest cluster has replicas.
pub fn plan(clusters: &[ClusterSpec]) -> Deployment {
    let mut next_id = 0u16;
    let mut groups = Vec::new();
    for (name, shell) in [("shell", true), ("filter-core", false)] {
        let members: Vec<&ClusterSpec> = clusters
            .iter()
            .filter(|c| (c.domain == FaultDomain::Shell) == shell)
            .collect();
        let count = members.iter().map(|c| c.size).max().unwrap_or(0);
        let machines = (0..count)
            .map(|i| {
                let id = next_id + i;
                let replicas = members
                    .iter()
                    .filter(|c| i < c.size)
                    .map(|c| ReplicaId::new(c.role, i))
                    .collect();
                Machine { id, replicas }
            })
            .collect();
        next_id += count;
        groups.push(MachineGroup {
            name: name.into(),
            shell,
            machines,
        });
    }
    Deployment { groups }
}

pub fn validate(d: &Deployment, clusters: &[ClusterSpec]) -> Result<(), String> {
    if d.groups.len() != 2 || d.groups.iter().filter(|g| g.shell).count() != 1 {
        return Err("expected one shell group and one filter/core group".into());
    }
    let domain: BTreeMap<_, _> = clusters.iter().map(|c| (c.role, c.domain)).collect();
    let mut ids = BTreeSet::new();
    let mut placed = BTreeSet::new();
    for g in &d.groups {
        for m in &g.machines {
            if !ids.insert(m.id) {
                return Err(format!("machine id {} used twice", m.id));
            }
            let mut roles = BTreeSet::new();
            for r in &m.replicas {
                let Some(dom) = domain.get(&r.cluster) else {
                    return Err(format!("{r} belongs to no cluster"));
                };
                if (*dom == FaultDomain::Shell) != g.shell {
                    return Err(format!("{r} ({dom}) placed in group {}", g.name));
                }
                if !roles.insert(r.cluster) {
                    return Err(format!("two {} replicas share machine {}", r.cluster, m.id));
                }
                if !placed.insert(*r) {
                    return Err(format!("{r} placed twice"));
                }
            }
        }
    }
    for c in clusters {
        for i in 0..c.size {
            let r = ReplicaId::new(c.role, i);
            if !placed.remove(&r) {
                return Err(format!("{r} not placed"));
            }
        }
    }
    if let Some(r) = placed.first() {
        return Err(format!("{r} exceeds its cluster size"));
    }
    Ok(())
}

/// Every shell replica gets its own configuration; everything else shares
/// the default one.
pub fn labels(clusters: &[ClusterSpec]) -> Vec<Label> {
    let mut n = 0;
    let mut out = Vec::new();
    for c in clusters {
        for i in 0..c.size {
            let label = if c.domain == FaultDomain::Shell {
                n += 1;
                format!("variant-{n}")
            } else {
                DEFAULT_LABEL.into()
            };
            out.push(Label {
                replica: ReplicaId::new(c.role, i),
                label,
            });
        }
    }
    out
}

pub fn validate_labels(labels: &[Label], clusters: &[ClusterSpec]) -> Result<(), String> {
    let by_replica: BTreeMap<ReplicaId, &str> = labels.iter().map(|l| (l.replica, l.label.as_str())).collect();
    if by_replica.len() != labels.len() {
        return Err("replica labelled twice".into());
    }
    let mut seen = BTreeSet::new();
    let mut total = 0;
    for c in clusters {
        for i in 0..c.size {
            total += 1;
            let r = ReplicaId::new(c.role, i);
            let Some(l) = by_replica.get(&r) else {
                return Err(format!("{r} has no label"));
            };
            if c.domain == FaultDomain::Shell {
                if *l == DEFAULT_LABEL || !seen.insert(*l) {
                    return Err(format!("{r} needs a distinct label"));
                }
            } else if *l != DEFAULT_LABEL {
                return Err(format!("{r} should use the default label"));
            }
        }
    }
    if total != labels.len() {
        return Err("labels for unknown replicas".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::ids::ClusterRole;
    use crate::tailor::{tailor, Preset};

    #[test]
    fn minas_uses_four_plus_three_machines() {
        let bp = tailor(&Preset::Minas.selection(), 1);
        assert_eq!(bp.deployment.group_sizes(), [4, 3]);
        let m = bp.deployment.machine_of(crate::ids::ReplicaId::new(ClusterRole::Executor, 3)).unwrap();
        assert_eq!(m, 3);
    }

    #[test]
    fn base_has_an_empty_shell_group() {
        let bp = tailor(&Preset::Base.selection(), 1);
        assert_eq!(bp.deployment.group_sizes(), [0, 3]);
        assert!(bp.labels.iter().all(|l| l.label == "default"));
    }

    #[test]
    fn sentry_groups() {
        let bp = tailor(&Preset::Sentry.selection(), 1);
        assert_eq!(bp.deployment.group_sizes(), [4, 4]);
        let variants = bp.labels.iter().filter(|l| l.label != "default").count();
        assert_eq!(variants, 8);
    }
}
