use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use super::{Dest, Outbox, ProtocolConfig, ProtocolEvent, ReportTarget, Reporter, Role};
use crate::auth::command_is_sealed;
use crate::command::Command;
use crate::envelope::{Body, Envelope};
use crate::ids::{ClientId, ClusterRole, Millis, ReplicaId};

#[derive(Debug, Clone, Default)]
struct KnownCommands {
    low: u64,
    cmds: BTreeMap<u64, Command>,
}

impl KnownCommands {
    fn count(&self) -> u64 {
        self.low + self.cmds.len() as u64
    }
}

/// Accepts client commands, spreads them among front ends and hands them to
/// the proposers.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    clients: BTreeMap<ClientId, KnownCommands>,
    count: u64,
    progress: Reporter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intake {
    New,
    Duplicate,
    Stale,
    Rejected,
}

impl FrontEnd {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        FrontEnd {
            id,
            cfg,
            clients: BTreeMap::new(),
            count: 0,
            progress: Reporter::new(ReportTarget::Submission),
        }
    }

    /// Total number of distinct commands this front end knows of.
    pub fn submission_count(&self) -> u64 {
        self.count
    }

    pub fn knows(&self, cmd: &Command) -> bool {
        self.clients
            .get(&cmd.id.client)
            .is_some_and(|k| cmd.id.counter < k.low || k.cmds.contains_key(&cmd.id.counter))
    }

    fn store(&mut self, cmd: &Command) -> Intake {
        if !command_is_sealed(self.cfg.auth.as_ref(), cmd) {
            return Intake::Rejected;
        }
        let known = self.clients.entry(cmd.id.client).or_default();
        let before = known.count();
        if cmd.client_low > known.low {
            known.low = cmd.client_low;
            known.cmds = known.cmds.split_off(&known.low);
        }
        let outcome = if cmd.id.counter < known.low {
            Intake::Stale
        } else if known.cmds.contains_key(&cmd.id.counter) {
            Intake::Duplicate
        } else {
            known.cmds.insert(cmd.id.counter, cmd.clone());
            Intake::New
        };
        let after = known.count();
        self.count = self.count + after - before.min(after);
        self.progress.set(self.count);
        outcome
    }

    /// Command straight from its client.
    pub fn on_command(&mut self, cmd: &Command, from_client: bool, out: &mut Outbox) -> Intake {
        let intake = self.store(cmd);
        match intake {
            Intake::New => {
                out.event(ProtocolEvent::Accepted { id: cmd.id });
                if from_client {
                    out.send(Dest::Peers, Body::Gossip(cmd.clone()));
                }
                out.send(Dest::Cluster(ClusterRole::Proposer), Body::Offer(cmd.clone()));
            }
            Intake::Duplicate if from_client => {
                // the client is still waiting, so proposers may have lost it
                out.send(Dest::Cluster(ClusterRole::Proposer), Body::Offer(cmd.clone()));
            }
            _ => {}
        }
        intake
    }
}

impl Role for FrontEnd {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, _now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Request(cmd) => {
                if env.sender == ReplicaId::client(cmd.id.client) {
                    self.on_command(cmd, true, out);
                }
            }
            Body::Gossip(cmd) => {
                self.on_command(cmd, false, out);
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        let timing = self.cfg.timing;
        self.progress.poll(now, &timing, out);
    }
}
