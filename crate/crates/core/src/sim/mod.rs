//! Deterministic discrete-event simulation.

pub mod byzantine;
pub mod checker;
pub mod engine;
pub mod faults;
pub mod metrics;
pub mod network;
pub mod trace;

pub use checker::{check_liveness, check_safety, LivenessVerdict, SafetyVerdict, Violation};
pub use engine::{run, RunStats, SimConfig, SimError, SimOutput, WorkItem, Workload};
pub use faults::{FaultEntry, FaultError, FaultKind, FaultScript, Target, UnknownFault};
pub use metrics::{Metrics, ViewChange};
pub use network::{NetworkModel, Partition};
pub use trace::{FaultSummary, SimTrace, TraceEvent, TraceHeader, TraceRecord};
