use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Simulated time in milliseconds.
pub type Millis = u64;

/// Client identifier.
pub type ClientId = u32;

/// The micro-replica clusters a tailored system can contain.
///
/// The first eight variants are the base-protocol clusters. The next four are
/// installed when the proposer is put in the shell. `Client` is not a server
/// cluster but takes part in message flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterRole {
    FrontEnd,
    Proposer,
    Committer,
    Executor,
    Controller,
    AgreementMonitor,
    CompletionMonitor,
    ViewMonitor,
    Preparer,
    Conservator,
    Curator,
    Auditor,
    RecordKeeper,
    Client,
}

impl ClusterRole {
    pub const COUNT: usize = 14;

    /// The eight clusters of the crash-tolerant base protocol.
    pub const BASE: [ClusterRole; 8] = [
        ClusterRole::FrontEnd,
        ClusterRole::Proposer,
        ClusterRole::Committer,
        ClusterRole::Executor,
        ClusterRole::Controller,
        ClusterRole::AgreementMonitor,
        ClusterRole::CompletionMonitor,
        ClusterRole::ViewMonitor,
    ];

    pub const ALL: [ClusterRole; 14] = [
        ClusterRole::FrontEnd,
        ClusterRole::Proposer,
        ClusterRole::Committer,
        ClusterRole::Executor,
        ClusterRole::Controller,
        ClusterRole::AgreementMonitor,
        ClusterRole::CompletionMonitor,
        ClusterRole::ViewMonitor,
        ClusterRole::Preparer,
        ClusterRole::Conservator,
        ClusterRole::Curator,
        ClusterRole::Auditor,
        ClusterRole::RecordKeeper,
        ClusterRole::Client,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClusterRole::FrontEnd => "front-end",
            ClusterRole::Proposer => "proposer",
            ClusterRole::Committer => "committer",
            ClusterRole::Executor => "executor",
            ClusterRole::Controller => "controller",
            ClusterRole::AgreementMonitor => "agreement-monitor",
            ClusterRole::CompletionMonitor => "completion-monitor",
            ClusterRole::ViewMonitor => "view-monitor",
            ClusterRole::Preparer => "preparer",
            ClusterRole::Conservator => "conservator",
            ClusterRole::Curator => "curator",
            ClusterRole::Auditor => "auditor",
            ClusterRole::RecordKeeper => "record-keeper",
            ClusterRole::Client => "client",
        }
    }

    pub fn is_base(self) -> bool {
        ClusterRole::BASE.contains(&self)
    }

    pub fn is_monitor(self) -> bool {
        matches!(
            self,
            ClusterRole::AgreementMonitor | ClusterRole::CompletionMonitor | ClusterRole::ViewMonitor
        )
    }
}

impl fmt::Display for ClusterRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown cluster role `{0}`")]
pub struct UnknownRole(pub alloc::string::String);

impl FromStr for ClusterRole {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: alloc::string::String = s
            .trim()
            .chars()
            .map(|c| if c == '_' || c == ' ' { '-' } else { c.to_ascii_lowercase() })
            .collect();
        let role = match norm.as_str() {
            "front-end" | "frontend" | "fe" => ClusterRole::FrontEnd,
            "proposer" => ClusterRole::Proposer,
            "committer" => ClusterRole::Committer,
            "executor" => ClusterRole::Executor,
            "controller" => ClusterRole::Controller,
            "agreement-monitor" => ClusterRole::AgreementMonitor,
            "completion-monitor" => ClusterRole::CompletionMonitor,
            "view-monitor" => ClusterRole::ViewMonitor,
            "preparer" => ClusterRole::Preparer,
            "conservator" => ClusterRole::Conservator,
            "curator" => ClusterRole::Curator,
            "auditor" => ClusterRole::Auditor,
            "record-keeper" | "recordkeeper" => ClusterRole::RecordKeeper,
            "client" => ClusterRole::Client,
            _ => return Err(UnknownRole(s.into())),
        };
        Ok(role)
    }
}

/// Identity of one micro replica (or client) in the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReplicaId {
    pub cluster: ClusterRole,
    pub index: u16,
}

impl ReplicaId {
    pub const fn new(cluster: ClusterRole, index: u16) -> Self {
        ReplicaId { cluster, index }
    }

    pub fn client(id: ClientId) -> Self {
        ReplicaId::new(ClusterRole::Client, id as u16)
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cluster, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplicaIdParseError {
    #[error("expected `<role>/<index>`, got `{0}`")]
    Shape(alloc::string::String),
    #[error(transparent)]
    Role(#[from] UnknownRole),
    #[error("bad replica index in `{0}`")]
    Index(alloc::string::String),
}

impl FromStr for ReplicaId {
    type Err = ReplicaIdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (role, idx) = s
            .split_once('/')
            .ok_or_else(|| ReplicaIdParseError::Shape(s.into()))?;
        let cluster = role.parse()?;
        let index = idx
            .parse()
            .map_err(|_| ReplicaIdParseError::Index(s.into()))?;
        Ok(ReplicaId { cluster, index })
    }
}

impl Serialize for ReplicaId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReplicaId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String as Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// View and sequence-number coordinates of a protocol message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coordinates {
    pub view: u64,
    pub seq: u64,
}

impl Coordinates {
    pub const fn new(view: u64, seq: u64) -> Self {
        Coordinates { view, seq }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn role_names_round_trip() {
        for role in ClusterRole::ALL {
            assert_eq!(role.name().parse::<ClusterRole>().unwrap(), role);
            assert_eq!(role.index(), ClusterRole::ALL.iter().position(|r| *r == role).unwrap());
        }
        assert!("janitor".parse::<ClusterRole>().is_err());
        assert_eq!("Front_End".parse::<ClusterRole>().unwrap(), ClusterRole::FrontEnd);
    }

    #[test]
    fn replica_id_display_parse() {
        let id = ReplicaId::new(ClusterRole::RecordKeeper, 2);
        assert_eq!(id.to_string(), "record-keeper/2");
        assert_eq!("record-keeper/2".parse::<ReplicaId>().unwrap(), id);
        assert!("executor".parse::<ReplicaId>().is_err());
        assert!("executor/x".parse::<ReplicaId>().is_err());
    }
}
