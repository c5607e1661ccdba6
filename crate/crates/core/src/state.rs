//! Deterministic execution state shared by executors and the checker oracle.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use crate::command::{fnv1a, Command, Digest, Fnv64, Value};
use crate::ids::ClientId;
use crate::kv::{kv_apply_bytes, KvStore};

/// Replies an executor keeps for one client.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClientTable {
    /// Every counter below this one is known to be executed.
    pub low: u64,
    pub replies: BTreeMap<u64, Arc<[u8]>>,
}

/// Application state plus the bookkeeping a checkpoint must carry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecState {
    pub kv: KvStore,
    pub clients: BTreeMap<ClientId, ClientTable>,
    /// Number of executed slots, no-ops included.
    pub slots: u64,
    /// Number of distinct commands executed.
    pub commands: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Noop,
    /// Already executed earlier; the stored reply if still retained.
    Duplicate(Option<Arc<[u8]>>),
    Executed(Arc<[u8]>),
}

impl ExecState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Executes the value of the next slot.
    pub fn execute(&mut self, value: &Value) -> Outcome {
        self.slots += 1;
        let Some(cmd) = value else {
            return Outcome::Noop;
        };
        self.execute_command(cmd)
    }

    fn execute_command(&mut self, cmd: &Command) -> Outcome {
        let table = self.clients.entry(cmd.id.client).or_default();
        if cmd.client_low > table.low {
            table.low = cmd.client_low;
            table.replies = table.replies.split_off(&table.low);
        }
        let counter = cmd.id.counter;
        if counter < table.low {
            return Outcome::Duplicate(None);
        }
        if let Some(r) = table.replies.get(&counter) {
            return Outcome::Duplicate(Some(r.clone()));
        }
        let reply: Arc<[u8]> = Arc::from(kv_apply_bytes(&mut self.kv, &cmd.payload));
        table.replies.insert(counter, reply.clone());
        self.commands += 1;
        Outcome::Executed(reply)
    }

    pub fn reply_for(&self, client: ClientId, counter: u64) -> Option<&Arc<[u8]>> {
        self.clients.get(&client)?.replies.get(&counter)
    }

    pub fn digest(&self) -> Digest {
        let mut h = Fnv64::new();
        h.write_u64(self.slots);
        h.write_u64(self.commands);
        h.write_u64(self.kv.digest());
        for (c, t) in &self.clients {
            h.write_u64(u64::from(*c));
            h.write_u64(t.low);
            for (n, r) in &t.replies {
                h.write_u64(*n);
                h.write_u64(fnv1a(r));
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::CommandId;
    use crate::kv::{KvCommand, KvOp, KvReply};
    use alloc::string::String;

    fn put(client: ClientId, counter: u64, low: u64, key: &str) -> Command {
        let kv = KvCommand {
            op: KvOp::Put,
            key: String::from(key),
            fields: Default::default(),
        };
        Command {
            id: CommandId::new(client, counter),
            payload: Arc::from(kv.encode()),
            client_low: low,
            seal: 0,
        }
    }

    #[test]
    fn duplicates_are_not_reapplied() {
        let mut s = ExecState::new();
        let c = put(1, 0, 0, "a");
        assert!(matches!(s.execute(&Some(c.clone())), Outcome::Executed(_)));
        let d = s.digest();
        let Outcome::Duplicate(Some(r)) = s.execute(&Some(c)) else {
            panic!("expected duplicate")
        };
        assert_eq!(KvReply::decode(&r), Ok(KvReply::Ok));
        assert_eq!(s.commands, 1);
        assert_eq!(s.slots, 2);
        assert_ne!(s.digest(), d);
    }

    #[test]
    fn client_low_collects_old_replies() {
        let mut s = ExecState::new();
        s.execute(&Some(put(1, 0, 0, "a")));
        s.execute(&Some(put(1, 1, 1, "b")));
        assert!(s.reply_for(1, 0).is_none());
        assert!(s.reply_for(1, 1).is_some());
        assert_eq!(s.execute(&Some(put(1, 0, 0, "a"))), Outcome::Duplicate(None));
        assert_eq!(s.execute(&None), Outcome::Noop);
    }
}
