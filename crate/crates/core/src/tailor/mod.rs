//! Tailoring: from a shell selection and `f` to a complete system blueprint,
//! plus the cost and exploit-resilience models.

pub mod blueprint;
pub mod cost;
pub mod deploy;
pub mod exploit;
pub mod graph;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::{ClusterRole, UnknownRole};

pub use blueprint::{adapt, configure, AdaptedCluster, AdaptedSystem, BlueprintError, ClusterSpec, InputSpec, SystemBlueprint};
pub use cost::{cost_of_blueprint, cost_of_preset, CostReport};
pub use deploy::{Deployment, Machine, MachineGroup};
pub use exploit::{DeploymentModel, Ratio};
pub use graph::{classify, DependencyGraph};

/// Fault domain of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultDomain {
    /// Exposed to Byzantine faults.
    Shell,
    /// Crash-only, but consumes at least one shell output.
    Filter,
    /// Crash-only and fed by crash-only clusters only.
    Core,
}

impl FaultDomain {
    pub fn name(self) -> &'static str {
        match self {
            FaultDomain::Shell => "shell",
            FaultDomain::Filter => "filter",
            FaultDomain::Core => "core",
        }
    }
}

impl fmt::Display for FaultDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TailorError {
    #[error("`{0}` is not one of the eight base clusters")]
    NotBase(ClusterRole),
    #[error(transparent)]
    UnknownRole(#[from] UnknownRole),
    #[error("empty role name in shell selection")]
    Empty,
}

/// The base clusters a user marks as Byzantine-exposed.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShellSelection(BTreeSet<ClusterRole>);

impl ShellSelection {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_roles(roles: impl IntoIterator<Item = ClusterRole>) -> Result<Self, TailorError> {
        let mut set = BTreeSet::new();
        for r in roles {
            if !r.is_base() {
                return Err(TailorError::NotBase(r));
            }
            set.insert(r);
        }
        Ok(ShellSelection(set))
    }

    /// Bit `i` selects `ClusterRole::BASE[i]`.
    pub fn from_mask(mask: u8) -> Self {
        ShellSelection(
            ClusterRole::BASE
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, r)| *r)
                .collect(),
        )
    }

    pub fn mask(&self) -> u8 {
        ClusterRole::BASE
            .iter()
            .enumerate()
            .filter(|(_, r)| self.0.contains(r))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn contains(&self, r: ClusterRole) -> bool {
        self.0.contains(&r)
    }

    pub fn roles(&self) -> impl Iterator<Item = ClusterRole> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset(&self, other: &ShellSelection) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl fmt::Display for ShellSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|r| r.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Accepts a preset name or a comma-separated list of base roles.
impl FromStr for ShellSelection {
    type Err = TailorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(p) = s.parse::<Preset>() {
            return Ok(p.selection());
        }
        let mut roles = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                if s.trim().is_empty() {
                    break;
                }
                return Err(TailorError::Empty);
            }
            roles.push(part.parse::<ClusterRole>()?);
        }
        ShellSelection::from_roles(roles)
    }
}

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Base,
    Minas,
    Sentry,
    MinasSentry,
    Mirador,
    /// The base protocol with every cluster diversified. Cost model only.
    Hybrid,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Base,
        Preset::Hybrid,
        Preset::Mirador,
        Preset::Minas,
        Preset::Sentry,
        Preset::MinasSentry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Base => "base",
            Preset::Minas => "minas",
            Preset::Sentry => "sentry",
            Preset::MinasSentry => "minas-sentry",
            Preset::Mirador => "mirador",
            Preset::Hybrid => "hybrid",
        }
    }

    pub fn selection(self) -> ShellSelection {
        use ClusterRole::*;
        let roles: &[ClusterRole] = match self {
            Preset::Base => &[],
            Preset::Minas => &[FrontEnd, Executor],
            Preset::Sentry => &[Proposer, Executor],
            Preset::MinasSentry => &[FrontEnd, Proposer, Executor],
            Preset::Mirador | Preset::Hybrid => &ClusterRole::BASE,
        };
        ShellSelection::from_roles(roles.iter().copied()).expect("base roles")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset `{0}`")]
pub struct UnknownPreset(pub String);

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', '+'], "-").as_str() {
            "base" | "baseline" => Ok(Preset::Base),
            "minas" => Ok(Preset::Minas),
            "sentry" => Ok(Preset::Sentry),
            "minas-sentry" => Ok(Preset::MinasSentry),
            "mirador" => Ok(Preset::Mirador),
            "hybrid" => Ok(Preset::Hybrid),
            _ => Err(UnknownPreset(s.into())),
        }
    }
}

/// Runs the whole pipeline: adapt, classify, configure, deploy.
pub fn tailor(sel: &ShellSelection, f: u32) -> SystemBlueprint {
    let adapted = adapt(sel);
    let graph = DependencyGraph::for_stage(adapted.features.agreement_stage);
    let domains = classify(&graph, &adapted.shell);
    configure(&adapted, &graph, &domains, f)
}
