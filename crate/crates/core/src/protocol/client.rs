use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use super::{Dest, Outbox, ProtocolConfig, ProtocolEvent, Role};
use crate::auth::seal_command;
use crate::command::{fnv1a, Command, CommandId};
use crate::envelope::{Body, Envelope};
use crate::ids::{ClientId, ClusterRole, Millis, ReplicaId};
use crate::quorum::quorum_match;

#[derive(Debug, Clone)]
struct Pending {
    cmd: Command,
    replies: BTreeMap<u16, Arc<[u8]>>,
    last_sent: Millis,
}

/// Open-loop client: submits whatever the workload hands it and waits for
/// matching replies from the executors.
#[derive(Debug, Clone)]
pub struct Client {
    id: ReplicaId,
    client: ClientId,
    cfg: Arc<ProtocolConfig>,
    next: u64,
    pending: BTreeMap<u64, Pending>,
    delivered: u64,
}

impl Client {
    pub fn new(client: ClientId, cfg: Arc<ProtocolConfig>) -> Self {
        Client {
            id: ReplicaId::client(client),
            client,
            cfg,
            next: 0,
            pending: BTreeMap::new(),
            delivered: 0,
        }
    }

    /// Lowest counter still waiting for a result.
    pub fn low(&self) -> u64 {
        self.pending.keys().next().copied().unwrap_or(self.next)
    }

    pub fn outstanding(&self) -> usize {
        self.pending.len()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn submit(&mut self, payload: Arc<[u8]>, now: Millis, out: &mut Outbox) -> CommandId {
        let id = CommandId::new(self.client, self.next);
        let client_low = self.low();
        self.next += 1;
        let mut cmd = Command {
            id,
            payload,
            client_low,
            seal: 0,
        };
        seal_command(self.cfg.auth.as_ref(), &mut cmd);
        out.event(ProtocolEvent::Submitted { id });
        out.send(Dest::Cluster(ClusterRole::FrontEnd), Body::Request(cmd.clone()));
        self.pending.insert(
            id.counter,
            Pending {
                cmd,
                replies: BTreeMap::new(),
                last_sent: now,
            },
        );
        id
    }

    fn on_reply(&mut self, from: ReplicaId, id: CommandId, result: &Arc<[u8]>, out: &mut Outbox) {
        if id.client != self.client || from.cluster != ClusterRole::Executor {
            return;
        }
        let Some(p) = self.pending.get_mut(&id.counter) else {
            return;
        };
        p.replies.entry(from.index).or_insert_with(|| result.clone());
        // a split vote is resolved by later replies
        if let Ok(Some(r)) = quorum_match(&p.replies, self.cfg.thresholds.reply) {
            self.pending.remove(&id.counter);
            self.delivered += 1;
            out.event(ProtocolEvent::Delivered { id, digest: fnv1a(&r) });
        }
    }
}

impl Role for Client {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, _now: Millis, out: &mut Outbox) {
        if let Body::Reply { id, result } = env.body.as_ref() {
            self.on_reply(env.sender, *id, result, out);
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        let period = self.cfg.timing.client_resend;
        for p in self.pending.values_mut() {
            if now >= p.last_sent + period {
                p.last_sent = now;
                out.send(Dest::Cluster(ClusterRole::FrontEnd), Body::Request(p.cmd.clone()));
                out.send(Dest::Cluster(ClusterRole::Executor), Body::FetchReply { id: p.cmd.id });
            }
        }
    }
}
