//! Byzantine-tolerant agreement stage. Installed in place of the direct
//! proposer-to-committer path when the proposer cluster is in the shell.

pub mod auditor;
pub mod conservator;
pub mod curator;
pub mod decision;
pub mod preparer;
pub mod record_keeper;

pub use auditor::Auditor;
pub use conservator::Conservator;
pub use curator::Curator;
pub use decision::{audit, build_decision, conservator_report, AuditOutcome};
pub use preparer::Preparer;
pub use record_keeper::RecordKeeper;
