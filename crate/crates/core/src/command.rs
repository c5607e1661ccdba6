use alloc::sync::Arc;
use core::fmt;

use crate::auth::AuthTag;
use crate::ids::ClientId;

/// 64-bit content digest.
pub type Digest = u64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a hasher.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(FNV_OFFSET)
    }
}

impl Fnv64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_key(key: u64) -> Self {
        let mut h = Self::default();
        h.write_u64(key);
        h
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a(bytes: &[u8]) -> Digest {
    let mut h = Fnv64::new();
    h.write(bytes);
    h.finish()
}

/// System-wide unique command identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommandId {
    pub client: ClientId,
    pub counter: u64,
}

impl CommandId {
    pub const fn new(client: ClientId, counter: u64) -> Self {
        CommandId { client, counter }
    }
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.client, self.counter)
    }
}

/// A client command.
///
/// `client_low` is the lowest counter the client had not yet seen answered
/// when it issued the command; replicas use it to garbage-collect per-client
/// state. The `seal` binds id, payload and `client_low` to the client.
#[derive(Clone, PartialEq, Eq)]
pub struct Command {
    pub id: CommandId,
    pub payload: Arc<[u8]>,
    pub client_low: u64,
    pub seal: AuthTag,
}

impl Command {
    pub fn payload_digest(&self) -> Digest {
        fnv1a(&self.payload)
    }

    /// Digest covering every field, the seal included.
    pub fn digest(&self) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(u64::from(self.id.client));
        h.write_u64(self.id.counter);
        h.write_u64(self.client_low);
        h.write_u64(self.seal);
        h.write(&self.payload);
        h.finish()
    }

    /// The message a client seals.
    pub fn seal_message(id: CommandId, payload: &[u8], client_low: u64) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(u64::from(id.client));
        h.write_u64(id.counter);
        h.write_u64(client_low);
        h.write_u64(fnv1a(payload));
        h.finish()
    }
}

impl fmt::Debug for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Command")
            .field("id", &self.id)
            .field("len", &self.payload.len())
            .field("client_low", &self.client_low)
            .finish()
    }
}

/// The content of an agreement slot. `None` is a no-op.
pub type Value = Option<Command>;

const NOOP_DIGEST: Digest = 0x6e6f_6f70_6e6f_6f70;

pub fn value_digest(v: &Value) -> Digest {
    match v {
        Some(c) => c.digest(),
        None => NOOP_DIGEST,
    }
}
