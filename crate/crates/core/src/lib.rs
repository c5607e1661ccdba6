//! Selective hybridization for micro-replicated state-machine replication.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that does not
//! touch the outside world: the crash-tolerant base protocol, the Byzantine
//! replacements installed by tailoring, the two architectural patterns and
//! their exhaustive checkers, the tailoring engine and cost models, and a
//! deterministic discrete-event simulator with safety/liveness checkers.
//!
//! File formats, the workload generator and the command-line tool live in the
//! `shellft` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod auth;
pub mod bft;
pub mod command;
pub mod envelope;
pub mod ids;
pub mod kv;
pub mod linear;
pub mod patterns;
pub mod protocol;
pub mod quorum;
pub mod sim;
pub mod state;
pub mod tailor;
pub mod window;

pub use command::{Command, CommandId, Digest, Value};
pub use envelope::{Body, Envelope, MessageKind};
pub use ids::{ClientId, ClusterRole, Coordinates, Millis, ReplicaId};
pub use quorum::{highest, quorum_match, OpinionSet, QuorumError};
pub use window::Window;
