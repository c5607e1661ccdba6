//! Modeled message authentication.
//!
//! The simulator stamps every envelope with the true sender, so a faulty
//! replica can lie about content but never about identity. Tags over
//! protocol data (client seals, proposal proofs) go through the same
//! [`Authenticator`] so that relayed data stays attributable to its origin.

use core::fmt::Debug;

use crate::command::{value_digest, Command, Digest, Fnv64, Value};
use crate::ids::{ClusterRole, Coordinates, ReplicaId};

pub type AuthTag = u64;

pub trait Authenticator: Debug + Send + Sync {
    fn tag(&self, signer: ReplicaId, data: Digest) -> AuthTag;

    fn verify(&self, signer: ReplicaId, data: Digest, tag: AuthTag) -> bool {
        self.tag(signer, data) == tag
    }
}

/// Keyed FNV tags. Not cryptographic; good enough to make accidental and
/// fuzzed forgeries fail verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedFnv {
    key: u64,
}

impl KeyedFnv {
    pub const fn new(key: u64) -> Self {
        KeyedFnv { key }
    }
}

impl Default for KeyedFnv {
    fn default() -> Self {
        KeyedFnv::new(0x5eed_f00d_cafe_d00d)
    }
}

impl Authenticator for KeyedFnv {
    fn tag(&self, signer: ReplicaId, data: Digest) -> AuthTag {
        let mut h = Fnv64::with_key(self.key);
        h.write_u64(signer.cluster.index() as u64);
        h.write_u64(u64::from(signer.index));
        h.write_u64(data);
        h.finish()
    }
}

pub fn seal_command(auth: &dyn Authenticator, cmd: &mut Command) {
    let msg = Command::seal_message(cmd.id, &cmd.payload, cmd.client_low);
    cmd.seal = auth.tag(ReplicaId::client(cmd.id.client), msg);
}

pub fn command_is_sealed(auth: &dyn Authenticator, cmd: &Command) -> bool {
    let msg = Command::seal_message(cmd.id, &cmd.payload, cmd.client_low);
    auth.verify(ReplicaId::client(cmd.id.client), msg, cmd.seal)
}

pub fn value_is_sealed(auth: &dyn Authenticator, v: &Value) -> bool {
    v.as_ref().is_none_or(|c| command_is_sealed(auth, c))
}

fn proposal_message(coords: Coordinates, value: &Value) -> Digest {
    let mut h = Fnv64::new();
    h.write_u64(coords.view);
    h.write_u64(coords.seq);
    h.write_u64(value_digest(value));
    h.finish()
}

/// Tag a proposer attaches to a proposal so that later view changes can tell
/// genuine proposals from fabricated history.
pub fn proposal_proof(
    auth: &dyn Authenticator,
    proposer: u16,
    coords: Coordinates,
    value: &Value,
) -> AuthTag {
    auth.tag(
        ReplicaId::new(ClusterRole::Proposer, proposer),
        proposal_message(coords, value),
    )
}

pub fn proof_is_valid(
    auth: &dyn Authenticator,
    proposer_count: u16,
    coords: Coordinates,
    value: &Value,
    proof: AuthTag,
) -> bool {
    if proposer_count == 0 {
        return false;
    }
    let leader = (coords.view % u64::from(proposer_count)) as u16;
    auth.verify(
        ReplicaId::new(ClusterRole::Proposer, leader),
        proposal_message(coords, value),
        proof,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::CommandId;
    use alloc::sync::Arc;

    #[test]
    fn seals_bind_content() {
        let auth = KeyedFnv::default();
        let mut cmd = Command {
            id: CommandId::new(3, 9),
            payload: Arc::from(&b"put"[..]),
            client_low: 4,
            seal: 0,
        };
        seal_command(&auth, &mut cmd);
        assert!(command_is_sealed(&auth, &cmd));
        let mut bent = cmd.clone();
        bent.client_low = 5;
        assert!(!command_is_sealed(&auth, &bent));
        let mut bent = cmd.clone();
        bent.id.client = 4;
        assert!(!command_is_sealed(&auth, &bent));
    }

    #[test]
    fn proofs_name_the_leader() {
        let auth = KeyedFnv::default();
        let c = Coordinates::new(3, 10);
        let p = proposal_proof(&auth, 1, c, &None);
        assert!(proof_is_valid(&auth, 2, c, &None, p));
        // view 3 with a single proposer has leader 0, not 1
        assert!(!proof_is_valid(&auth, 1, c, &None, p));
        assert!(!proof_is_valid(&auth, 2, Coordinates::new(3, 11), &None, p));
    }
}
