//! Single-clock event loop driving every replica and client.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::byzantine::Adversary;
use super::faults::{FaultError, FaultKind, FaultScript};
use super::network::NetworkModel;
use super::trace::{SimTrace, TraceEvent, TraceHeader, TraceRecord};
use crate::auth::{Authenticator, KeyedFnv};
use crate::envelope::{Body, Envelope};
use crate::ids::{ClientId, ClusterRole, Millis, ReplicaId};
use crate::protocol::{Dest, Outbox, ProtocolConfig, ProtocolEvent, Replica, Timing};
use crate::tailor::{BlueprintError, SystemBlueprint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub at: Millis,
    pub client: ClientId,
    pub payload: Arc<[u8]>,
}

/// Timed client submissions. Items of one client get consecutive counters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Workload {
    pub clients: u32,
    pub items: Vec<WorkItem>,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub network: NetworkModel,
    pub faults: FaultScript,
    pub seed: u64,
    pub horizon: Millis,
    pub timing: Timing,
    /// Record every delivered message; large.
    pub record_deliveries: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            network: NetworkModel::default(),
            faults: FaultScript::default(),
            seed: 0,
            horizon: 10_000,
            timing: Timing::default(),
            record_deliveries: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid blueprint: {0}")]
    Blueprint(#[from] BlueprintError),
    #[error("invalid fault script: {0}")]
    Faults(#[from] FaultError),
    #[error("workload names client {0}, only {1} configured")]
    Client(ClientId, u32),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub stats: RunStats,
}

#[derive(Debug)]
enum Ev {
    Deliver { to: usize, env: Envelope },
    Tick(usize),
    Submit(usize),
    Fault(usize),
}

#[derive(Debug)]
struct Queued {
    time: Millis,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        (self.time, self.seq) == (o.time, o.seq)
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap pops the earliest first
    fn cmp(&self, o: &Self) -> Ordering {
        (o.time, o.seq).cmp(&(self.time, self.seq))
    }
}

struct Node {
    replica: Replica,
    machine: Option<u16>,
    crashed: bool,
    adversary: Option<Adversary>,
}

struct Sim<'a> {
    cfg: Arc<ProtocolConfig>,
    auth: Arc<dyn Authenticator>,
    bp: &'a SystemBlueprint,
    sim: &'a SimConfig,
    workload: &'a Workload,
    nodes: Vec<Node>,
    index: BTreeMap<ReplicaId, usize>,
    members: Vec<Vec<usize>>,
    queue: BinaryHeap<Queued>,
    next_seq: u64,
    net_rng: ChaCha8Rng,
    records: Vec<TraceRecord>,
    stats: RunStats,
}

/// Runs one simulation. The output is a pure function of the arguments.
pub fn run(bp: &SystemBlueprint, workload: &Workload, sim: &SimConfig) -> Result<SimOutput, SimError> {
    bp.validate()?;
    sim.faults.validate(bp)?;
    if let Some(w) = workload.items.iter().find(|w| w.client >= workload.clients) {
        return Err(SimError::Client(w.client, workload.clients));
    }
    let auth: Arc<dyn Authenticator> = Arc::new(KeyedFnv::new(sim.seed ^ 0x5eed_f00d_cafe_d00d));
    let mut pc = ProtocolConfig::from_blueprint(bp, auth.clone());
    pc.timing = sim.timing;
    let cfg = Arc::new(pc);

    let mut s = Sim {
        cfg: cfg.clone(),
        auth,
        bp,
        sim,
        workload,
        nodes: Vec::new(),
        index: BTreeMap::new(),
        members: (0..ClusterRole::COUNT).map(|_| Vec::new()).collect(),
        queue: BinaryHeap::new(),
        next_seq: 0,
        net_rng: ChaCha8Rng::seed_from_u64(sim.seed),
        records: Vec::new(),
        stats: RunStats::default(),
    };
    let ids: Vec<ReplicaId> = bp
        .replicas()
        .chain((0..workload.clients).map(ReplicaId::client))
        .collect();
    for id in ids {
        let i = s.nodes.len();
        s.nodes.push(Node {
            replica: Replica::new(id, &cfg),
            machine: bp.deployment.machine_of(id),
            crashed: false,
            adversary: None,
        });
        s.index.insert(id, i);
        s.members[id.cluster.index()].push(i);
    }
    let mut tick_rng = ChaCha8Rng::seed_from_u64(sim.seed.rotate_left(17) ^ 0x7469_636b);
    for i in 0..s.nodes.len() {
        let offset = tick_rng.random_range(0..sim.timing.tick.max(1));
        s.push(offset, Ev::Tick(i));
    }
    for (i, w) in workload.items.iter().enumerate() {
        s.push(w.at, Ev::Submit(i));
    }
    for (i, e) in sim.faults.entries.iter().enumerate() {
        s.push(e.at, Ev::Fault(i));
    }
    s.run();

    let header = TraceHeader {
        shell: bp
            .shell_selection
            .iter()
            .map(|r| r.name())
            .collect::<Vec<_>>()
            .join(","),
        f: bp.f,
        seed: sim.seed,
        horizon: sim.horizon,
        gst: sim.network.stable_from(),
        clients: workload.clients,
        executors: bp.size(ClusterRole::Executor),
    };
    Ok(SimOutput {
        trace: SimTrace {
            header,
            records: s.records,
        },
        stats: s.stats,
    })
}

impl Sim<'_> {
    fn push(&mut self, time: Millis, ev: Ev) {
        self.next_seq += 1;
        self.queue.push(Queued {
            time,
            seq: self.next_seq,
            ev,
        });
    }

    fn record(&mut self, time: Millis, node: ReplicaId, event: TraceEvent) {
        self.records.push(TraceRecord { time, node, event });
    }

    fn run(&mut self) {
        let mut out = Outbox::new();
        while let Some(q) = self.queue.pop() {
            if q.time > self.sim.horizon {
                break;
            }
            let now = q.time;
            out.clear();
            let from = match q.ev {
                Ev::Tick(i) => {
                    self.push(now + self.sim.timing.tick.max(1), Ev::Tick(i));
                    if self.nodes[i].crashed {
                        continue;
                    }
                    self.nodes[i].replica.on_tick(now, &mut out);
                    i
                }
                Ev::Deliver { to, env } => {
                    if self.nodes[to].crashed {
                        self.stats.dropped += 1;
                        continue;
                    }
                    let msg = Envelope::auth_message(env.sender, env.kind, env.coords);
                    if env.kind != env.body.kind() || !self.auth.verify(env.sender, msg, env.auth) {
                        self.stats.rejected += 1;
                        continue;
                    }
                    self.stats.delivered += 1;
                    if self.sim.record_deliveries {
                        let node = self.nodes[to].replica.id();
                        let ev = TraceEvent::Deliver {
                            from: env.sender,
                            kind: env.kind,
                            coords: env.coords,
                        };
                        self.record(now, node, ev);
                    }
                    self.nodes[to].replica.on_message(&env, now, &mut out);
                    to
                }
                Ev::Submit(k) => {
                    let item = &self.workload.items[k];
                    let i = self.index[&ReplicaId::client(item.client)];
                    let payload = item.payload.clone();
                    let Replica::Client(c) = &mut self.nodes[i].replica else {
                        unreachable!("clients are registered under their own role")
                    };
                    let id = c.submit(payload.clone(), now, &mut out);
                    let client_low = out
                        .sends
                        .iter()
                        .find_map(|(_, b)| match b {
                            Body::Request(cmd) if cmd.id == id => Some(cmd.client_low),
                            _ => None,
                        })
                        .unwrap_or(0);
                    let node = ReplicaId::client(item.client);
                    self.record(now, node, TraceEvent::Submit { id, client_low, payload });
                    i
                }
                Ev::Fault(k) => {
                    self.inject(now, k);
                    continue;
                }
            };
            self.emit(now, from, &mut out);
        }
    }

    fn inject(&mut self, now: Millis, k: usize) {
        let e = self.sim.faults.entries[k];
        for r in FaultScript::replicas_of(e.target, self.bp) {
            let Some(&i) = self.index.get(&r) else { continue };
            let seed = self.sim.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let node = &mut self.nodes[i];
            if e.kind == FaultKind::Crash {
                if node.crashed {
                    continue;
                }
                node.crashed = true;
            } else {
                node.adversary.get_or_insert_with(|| Adversary::new(r, seed)).add(e.kind);
            }
            self.record(now, r, TraceEvent::Fault { kind: e.kind });
        }
    }

    fn recipients(&self, from: usize, dest: Dest) -> Vec<usize> {
        let me = self.nodes[from].replica.id();
        match dest {
            Dest::Cluster(role) => self.members[role.index()].clone(),
            Dest::Peers => self.members[me.cluster.index()]
                .iter()
                .copied()
                .filter(|i| *i != from)
                .collect(),
            Dest::Replica(r) => self.index.get(&r).copied().into_iter().collect(),
        }
    }

    fn emit(&mut self, now: Millis, from: usize, out: &mut Outbox) {
        let sender = self.nodes[from].replica.id();
        for e in out.events.drain(..) {
            let ev = match e {
                ProtocolEvent::Submitted { .. } => continue,
                ProtocolEvent::Accepted { id } => TraceEvent::Accept { id },
                ProtocolEvent::Committed { view, seq, digest, id } => TraceEvent::Commit { view, seq, digest, id },
                ProtocolEvent::Executed {
                    seq,
                    id,
                    reply,
                    duplicate,
                } => TraceEvent::Execute {
                    seq,
                    id,
                    reply,
                    duplicate,
                },
                ProtocolEvent::CheckpointTaken { seq, digest } => TraceEvent::Checkpoint {
                    seq,
                    digest,
                    installed: false,
                },
                ProtocolEvent::CheckpointInstalled { seq, digest } => TraceEvent::Checkpoint {
                    seq,
                    digest,
                    installed: true,
                },
                ProtocolEvent::Delivered { id, digest } => TraceEvent::Reply { id, digest },
                ProtocolEvent::ViewAnnounced { view } => TraceEvent::ViewAnnounce { view },
                ProtocolEvent::ViewAdopted { view } => TraceEvent::ViewAdopt { view },
                ProtocolEvent::NewViewStarted { view, start, end } => TraceEvent::NewView { view, start, end },
                ProtocolEvent::Decided { view, digest } => TraceEvent::Decide { view, digest },
                ProtocolEvent::Rejected { view } => TraceEvent::Reject { view },
                ProtocolEvent::Alarm { what, seq } => TraceEvent::Alarm {
                    what: what.to_string(),
                    seq,
                },
            };
            self.record(now, sender, ev);
        }
        let sends: Vec<(Dest, Body)> = out.sends.drain(..).collect();
        for (dest, body) in sends {
            let body = Arc::new(body);
            for to in self.recipients(from, dest) {
                let target = self.nodes[to].replica.id();
                let rewritten = match &mut self.nodes[from].adversary {
                    Some(adv) => adv.rewrite(&self.cfg, target, &body).map(Arc::new),
                    None => None,
                };
                let body = rewritten.unwrap_or_else(|| body.clone());
                let kind = body.kind();
                let coords = body.coords();
                let env = Envelope {
                    sender,
                    kind,
                    coords,
                    auth: self.auth.tag(sender, Envelope::auth_message(sender, kind, coords)),
                    body,
                };
                self.stats.sent += 1;
                let delay = if to == from {
                    Some(0)
                } else {
                    let (a, b) = (self.nodes[from].machine, self.nodes[to].machine);
                    self.sim.network.transit(now, a, b, &mut self.net_rng)
                };
                match delay {
                    Some(d) => self.push(now + d, Ev::Deliver { to, env }),
                    None => self.stats.dropped += 1,
                }
            }
        }
    }
}

/// Short label for a run, used in reports.
pub fn describe(bp: &SystemBlueprint, sim: &SimConfig) -> alloc::string::String {
    format!(
        "f={} shell=[{}] seed={} horizon={}ms faults={}",
        bp.f,
        bp.shell_selection.iter().map(|r| r.name()).collect::<Vec<_>>().join(","),
        sim.seed,
        sim.horizon,
        sim.faults.entries.len()
    )
}
