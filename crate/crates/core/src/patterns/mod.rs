//! Reliable-distribution and relay patterns in their crash- and
//! Byzantine-tolerant variants, with an exhaustive adversary checker.

mod check;
mod run;

use core::fmt;

use serde::{Deserialize, Serialize};

pub use check::{check_pattern_properties, Checker, Counterexample, ExplosionGuard, Property, Verdict};
pub use run::{rdp_run, relay_run, Crash, NodeFault, SourceInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    ReliableDistribution,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Cft,
    Bft,
}

/// One of the two symbols a node can propose; `None` stands for absence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    V0,
    V1,
}

pub type Sym = Option<Val>;

/// The three-symbol domain enumerated by the checker.
pub const DOMAIN: [Sym; 3] = [Some(Val::V0), Some(Val::V1), None];

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Val::V0 => "v0",
            Val::V1 => "v1",
        })
    }
}

pub(crate) struct ShowSym(pub Sym);

impl fmt::Display for ShowSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("_"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternInstance {
    pub kind: PatternKind,
    pub variant: Variant,
    pub f: u32,
    pub sources: u32,
    /// Witnesses for reliable distribution, relays for the relay pattern.
    pub middle: u32,
    pub sinks: u32,
    pub source_threshold: u32,
    pub sink_threshold: u32,
}

impl PatternInstance {
    pub fn rdp_cft(f: u32, sinks: u32) -> Self {
        PatternInstance {
            kind: PatternKind::ReliableDistribution,
            variant: Variant::Cft,
            f,
            sources: 1,
            middle: 0,
            sinks,
            source_threshold: 1,
            sink_threshold: 1,
        }
    }

    pub fn relay_cft(f: u32, sinks: u32) -> Self {
        PatternInstance {
            kind: PatternKind::Relay,
            variant: Variant::Cft,
            f,
            sources: 2 * f + 1,
            middle: 2 * f + 1,
            sinks,
            source_threshold: f + 1,
            sink_threshold: f + 1,
        }
    }

    pub fn rdp_bft(f: u32, sinks: u32) -> Self {
        transform(Self::rdp_cft(f, sinks), true)
    }

    pub fn relay_bft(f: u32, sinks: u32) -> Self {
        transform(Self::relay_cft(f, sinks), true)
    }

    /// Checks the size and threshold table for the instance's kind and variant.
    pub fn is_well_formed(&self) -> bool {
        let f = self.f;
        let want = match (self.kind, self.variant) {
            (PatternKind::ReliableDistribution, Variant::Cft) => (1, 0, 1, 1),
            (PatternKind::ReliableDistribution, Variant::Bft) => (1, 3 * f + 1, 1, 2 * f + 1),
            (PatternKind::Relay, Variant::Cft) => (2 * f + 1, 2 * f + 1, f + 1, f + 1),
            (PatternKind::Relay, Variant::Bft) => (3 * f + 1, 2 * f + 1, 2 * f + 1, f + 1),
        };
        self.sinks > 0 && (self.sources, self.middle, self.source_threshold, self.sink_threshold) == want
    }
}

/// Replaces a crash-tolerant pattern by its Byzantine-tolerant counterpart
/// when the source cluster is exposed to Byzantine faults.
pub fn transform(inst: PatternInstance, source_is_shell: bool) -> PatternInstance {
    if !source_is_shell || inst.variant == Variant::Bft {
        return inst;
    }
    let f = inst.f;
    match inst.kind {
        PatternKind::ReliableDistribution => PatternInstance {
            variant: Variant::Bft,
            middle: 3 * f + 1,
            sink_threshold: 2 * f + 1,
            ..inst
        },
        PatternKind::Relay => PatternInstance {
            variant: Variant::Bft,
            sources: 3 * f + 1,
            source_threshold: 2 * f + 1,
            ..inst
        },
    }
}
