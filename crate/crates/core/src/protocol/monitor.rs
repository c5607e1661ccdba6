use alloc::sync::Arc;
use alloc::vec::Vec;

use super::flows::{loop_of, loop_sources, observer_hosts};
use super::{Dest, Outbox, ProtocolConfig, Role};
use crate::envelope::{Body, ControlLoop, Envelope};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::quorum::OpinionSet;

/// Aggregates a monotone value of one control loop and distributes it to the
/// loop's observers.
#[derive(Debug, Clone)]
pub struct Monitor {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    control: ControlLoop,
    sources: OpinionSet<u16, u64>,
    forwards: OpinionSet<u16, u64>,
    value: Option<u64>,
    sent: Option<u64>,
    last: Millis,
    hosts: Vec<ClusterRole>,
}

impl Monitor {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let control = loop_of(id.cluster).expect("monitor cluster");
        Monitor {
            id,
            control,
            hosts: observer_hosts(control, cfg.features.agreement_stage),
            cfg,
            sources: OpinionSet::new(),
            forwards: OpinionSet::new(),
            value: None,
            sent: None,
            last: 0,
        }
    }

    pub fn control(&self) -> ControlLoop {
        self.control
    }

    pub fn value(&self) -> Option<u64> {
        self.value
    }

    fn recompute(&mut self) {
        let c = self.control.index();
        let t = self.cfg.thresholds;
        let v = self
            .sources
            .highest(t.source[c])
            .max(self.forwards.highest(t.forward[c]));
        self.value = self.value.max(v);
    }

    fn push(&mut self, now: Millis, out: &mut Outbox) {
        let Some(value) = self.value else {
            return;
        };
        out.send(
            Dest::Peers,
            Body::Forward {
                control: self.control,
                value,
            },
        );
        for h in &self.hosts {
            out.send(
                Dest::Cluster(*h),
                Body::Notify {
                    control: self.control,
                    value,
                },
            );
        }
        self.sent = Some(value);
        self.last = now;
    }
}

impl Role for Monitor {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::Report { control, value }
                if *control == self.control && env.sender.cluster == loop_sources(self.control) =>
            {
                self.sources.report(env.sender.index, *value);
            }
            Body::Forward { control, value } if *control == self.control && env.sender.cluster == self.id.cluster => {
                self.forwards.report(env.sender.index, *value);
            }
            _ => return,
        }
        self.recompute();
        if self.value != self.sent && now >= self.last + self.cfg.timing.control_period {
            self.push(now, out);
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        let timing = self.cfg.timing;
        let changed = self.value != self.sent && now >= self.last + timing.control_period;
        if changed || (self.value.is_some() && now >= self.last + timing.refresh) {
            self.push(now, out);
        }
    }
}
