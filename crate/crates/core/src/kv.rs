//! Replicated key-value store application.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::command::{Digest, Fnv64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvOp {
    Put,
    Get,
    Update,
}

impl KvOp {
    fn code(self) -> u8 {
        match self {
            KvOp::Put => 1,
            KvOp::Get => 2,
            KvOp::Update => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(KvOp::Put),
            2 => Some(KvOp::Get),
            3 => Some(KvOp::Update),
            _ => None,
        }
    }
}

pub type Fields = BTreeMap<String, Arc<[u8]>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvCommand {
    pub op: KvOp,
    pub key: String,
    pub fields: Fields,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KvReply {
    Ok,
    Found(Fields),
    NotFound,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("malformed key-value command")]
pub struct Malformed;

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Malformed> {
        if self.buf.len() < n {
            return Err(Malformed);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, Malformed> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, Malformed> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, Malformed> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String, Malformed> {
        let n = self.u16()? as usize;
        let b = self.take(n)?;
        core::str::from_utf8(b).map(String::from).map_err(|_| Malformed)
    }

    fn fields(&mut self) -> Result<Fields, Malformed> {
        let n = self.u16()?;
        let mut fields = Fields::new();
        for _ in 0..n {
            let name = self.string()?;
            let len = self.u32()? as usize;
            fields.insert(name, Arc::from(self.take(len)?));
        }
        Ok(fields)
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_fields(out: &mut Vec<u8>, fields: &Fields) {
    out.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    for (name, v) in fields {
        put_string(out, name);
        out.extend_from_slice(&(v.len() as u32).to_le_bytes());
        out.extend_from_slice(v);
    }
}

impl KvCommand {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.op.code());
        put_string(&mut out, &self.key);
        put_fields(&mut out, &self.fields);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Malformed> {
        let mut r = Reader { buf: bytes };
        let op = KvOp::from_code(r.u8()?).ok_or(Malformed)?;
        let key = r.string()?;
        let fields = r.fields()?;
        if !r.buf.is_empty() {
            return Err(Malformed);
        }
        Ok(KvCommand { op, key, fields })
    }
}

impl KvReply {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            KvReply::Ok => out.push(0),
            KvReply::Found(fields) => {
                out.push(1);
                put_fields(&mut out, fields);
            }
            KvReply::NotFound => out.push(2),
            KvReply::Malformed => out.push(3),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Malformed> {
        let mut r = Reader { buf: bytes };
        let reply = match r.u8()? {
            0 => KvReply::Ok,
            1 => KvReply::Found(r.fields()?),
            2 => KvReply::NotFound,
            3 => KvReply::Malformed,
            _ => return Err(Malformed),
        };
        if !r.buf.is_empty() {
            return Err(Malformed);
        }
        Ok(reply)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Record {
    fields: Fields,
    hash: u64,
}

fn record_hash(key: &str, fields: &Fields) -> u64 {
    let mut h = Fnv64::new();
    h.write(key.as_bytes());
    h.write_u64(fields.len() as u64);
    for (name, v) in fields {
        h.write(name.as_bytes());
        h.write_u64(v.len() as u64);
        h.write(v);
    }
    h.finish()
}

/// Key-value state with an incrementally maintained digest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KvStore {
    records: BTreeMap<String, Record>,
    digest_sum: u64,
}

impl KvStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Fields> {
        self.records.get(key).map(|r| &r.fields)
    }

    /// Order-independent digest of the whole store.
    pub fn digest(&self) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(self.records.len() as u64);
        h.write_u64(self.digest_sum);
        h.finish()
    }

    fn set(&mut self, key: String, fields: Fields) {
        let hash = record_hash(&key, &fields);
        if let Some(old) = self.records.insert(key, Record { fields, hash }) {
            self.digest_sum = self.digest_sum.wrapping_sub(old.hash);
        }
        self.digest_sum = self.digest_sum.wrapping_add(hash);
    }

    /// Overwrites one record without touching the digest bookkeeping, so the
    /// stored digest no longer describes the content. Used to build corrupted
    /// snapshots.
    pub fn corrupt(&mut self, key: &str, fields: Fields) {
        if let Some(r) = self.records.get_mut(key) {
            r.fields = fields;
        } else {
            self.records.insert(key.into(), Record { fields, hash: 0 });
        }
    }

    /// Recomputes the digest from scratch.
    pub fn recompute_digest(&mut self) {
        let mut sum = 0u64;
        for (k, r) in self.records.iter_mut() {
            r.hash = record_hash(k, &r.fields);
            sum = sum.wrapping_add(r.hash);
        }
        self.digest_sum = sum;
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn snapshot(&self) -> KvStore {
        self.clone()
    }

    pub fn restore(snapshot: &KvStore) -> KvStore {
        snapshot.clone()
    }
}

pub fn kv_apply(state: &mut KvStore, cmd: &KvCommand) -> KvReply {
    match cmd.op {
        KvOp::Get => match state.get(&cmd.key) {
            Some(fields) => KvReply::Found(fields.clone()),
            None => KvReply::NotFound,
        },
        KvOp::Put => {
            state.set(cmd.key.clone(), cmd.fields.clone());
            KvReply::Ok
        }
        KvOp::Update => {
            let mut fields = state.get(&cmd.key).cloned().unwrap_or_default();
            for (k, v) in &cmd.fields {
                fields.insert(k.clone(), v.clone());
            }
            state.set(cmd.key.clone(), fields);
            KvReply::Ok
        }
    }
}

/// Applies an encoded command and returns the encoded reply.
pub fn kv_apply_bytes(state: &mut KvStore, payload: &[u8]) -> Vec<u8> {
    match KvCommand::decode(payload) {
        Ok(cmd) => kv_apply(state, &cmd).encode(),
        Err(Malformed) => KvReply::Malformed.encode(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fields(pairs: &[(&str, &[u8])]) -> Fields {
        pairs
            .iter()
            .map(|(k, v)| (String::from(*k), Arc::from(*v)))
            .collect()
    }

    fn cmd(op: KvOp, key: &str, f: Fields) -> KvCommand {
        KvCommand {
            op,
            key: key.into(),
            fields: f,
        }
    }

    #[test]
    fn put_then_get() {
        let mut s = KvStore::new();
        let f = fields(&[("f1", b"v")]);
        assert_eq!(kv_apply(&mut s, &cmd(KvOp::Put, "k", f.clone())), KvReply::Ok);
        assert_eq!(
            kv_apply(&mut s, &cmd(KvOp::Get, "k", Fields::new())),
            KvReply::Found(f)
        );
        assert_eq!(
            kv_apply(&mut s, &cmd(KvOp::Get, "absent", Fields::new())),
            KvReply::NotFound
        );
    }

    #[test]
    fn update_merges_fields() {
        let mut s = KvStore::new();
        kv_apply(&mut s, &cmd(KvOp::Put, "k", fields(&[("a", b"1"), ("b", b"2")])));
        kv_apply(&mut s, &cmd(KvOp::Update, "k", fields(&[("b", b"3")])));
        assert_eq!(s.get("k"), Some(&fields(&[("a", b"1"), ("b", b"3")])));
        kv_apply(&mut s, &cmd(KvOp::Update, "n", fields(&[("c", b"4")])));
        assert_eq!(s.get("n"), Some(&fields(&[("c", b"4")])));
    }

    #[test]
    fn malformed_bytes_get_error_reply() {
        let mut s = KvStore::new();
        let r = kv_apply_bytes(&mut s, &[9, 9, 9]);
        assert_eq!(KvReply::decode(&r), Ok(KvReply::Malformed));
        let mut enc = cmd(KvOp::Get, "k", Fields::new()).encode();
        enc.push(0);
        assert_eq!(KvCommand::decode(&enc), Err(Malformed));
    }

    #[test]
    fn corruption_is_visible_only_after_recompute() {
        let mut s = KvStore::new();
        kv_apply(&mut s, &cmd(KvOp::Put, "k", fields(&[("a", b"1")])));
        let honest = s.digest();
        let mut bad = s.snapshot();
        bad.corrupt("k", fields(&[("a", b"X")]));
        assert_eq!(bad.digest(), honest);
        bad.recompute_digest();
        assert_ne!(bad.digest(), honest);
    }

    fn arb_cmd() -> impl Strategy<Value = KvCommand> {
        (
            prop_oneof![Just(KvOp::Put), Just(KvOp::Get), Just(KvOp::Update)],
            "[a-d]{1,2}",
            proptest::collection::btree_map("[xy]", proptest::collection::vec(any::<u8>(), 0..4), 0..3),
        )
            .prop_map(|(op, key, f)| KvCommand {
                op,
                key,
                fields: f.into_iter().map(|(k, v)| (k, Arc::from(v))).collect(),
            })
    }

    proptest! {
        #[test]
        fn encoding_round_trips(c in arb_cmd()) {
            prop_assert_eq!(KvCommand::decode(&c.encode()), Ok(c));
        }

        #[test]
        fn incremental_digest_matches_recomputed(cmds in proptest::collection::vec(arb_cmd(), 0..30)) {
            let mut s = KvStore::new();
            for c in &cmds {
                kv_apply(&mut s, c);
            }
            let mut fresh = s.clone();
            fresh.recompute_digest();
            prop_assert_eq!(s.digest(), fresh.digest());
            let restored = KvStore::restore(&s.snapshot());
            prop_assert_eq!(&restored, &s);
        }

        #[test]
        fn apply_is_deterministic(cmds in proptest::collection::vec(arb_cmd(), 0..20)) {
            let mut a = KvStore::new();
            let mut b = KvStore::new();
            let ra: Vec<_> = cmds.iter().map(|c| kv_apply(&mut a, c)).collect();
            let rb: Vec<_> = cmds.iter().map(|c| kv_apply(&mut b, c)).collect();
            prop_assert_eq!(ra, rb);
            prop_assert_eq!(a.digest(), b.digest());
        }
    }
}
