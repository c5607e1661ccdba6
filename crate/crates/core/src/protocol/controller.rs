use alloc::sync::Arc;

use super::{Observer, Outbox, ProtocolConfig, ProtocolEvent, ReportTarget, Reporter, Role};
use crate::envelope::{Body, ControlLoop, Envelope, Progress};
use crate::ids::{ClusterRole, Millis, ReplicaId};
use crate::quorum::OpinionSet;

/// Watches submitted versus finalized commands and announces a new view when
/// progress stalls.
#[derive(Debug, Clone)]
pub struct Controller {
    id: ReplicaId,
    cfg: Arc<ProtocolConfig>,
    submissions: OpinionSet<u16, u64>,
    completion_obs: Observer,
    view_obs: Observer,
    finalized: u64,
    adopted: u64,
    announced: u64,
    timeout: Millis,
    deadline: Option<Millis>,
    report: Reporter,
}

impl Controller {
    pub fn new(id: ReplicaId, cfg: Arc<ProtocolConfig>) -> Self {
        let t = cfg.thresholds;
        Controller {
            id,
            completion_obs: Observer::new(t.observer(ControlLoop::Completion)),
            view_obs: Observer::new(t.observer(ControlLoop::View)),
            timeout: cfg.timing.view_timeout,
            cfg,
            submissions: OpinionSet::new(),
            finalized: 0,
            adopted: 0,
            announced: 0,
            deadline: None,
            report: Reporter::new(ReportTarget::Loop(ControlLoop::View)),
        }
    }

    /// Commands known to have been submitted by enough front ends.
    pub fn target(&self) -> u64 {
        self.submissions.highest(self.cfg.thresholds.submission).unwrap_or(0)
    }

    pub fn finalized(&self) -> u64 {
        self.finalized
    }

    pub fn view(&self) -> u64 {
        self.adopted.max(self.announced)
    }

    pub fn deadline(&self) -> Option<Millis> {
        self.deadline
    }

    pub fn timeout(&self) -> Millis {
        self.timeout
    }

    fn rearm(&mut self, now: Millis) {
        if self.target() > self.finalized {
            if self.deadline.is_none() {
                self.deadline = Some(now + self.timeout);
            }
        } else {
            self.deadline = None;
        }
    }

    fn announce(&mut self, now: Millis, out: &mut Outbox) {
        self.announced = self.view() + 1;
        out.event(ProtocolEvent::ViewAnnounced { view: self.announced });
        self.report.set(self.announced);
        self.report.flush(now, out);
    }

    fn on_progress(&mut self, commands: u64, now: Millis) {
        if commands > self.finalized {
            self.finalized = commands;
            self.timeout = self.cfg.timing.view_timeout;
            self.deadline = None;
        }
        self.rearm(now);
    }
}

impl Role for Controller {
    fn id(&self) -> ReplicaId {
        self.id
    }

    fn cfg(&self) -> &Arc<ProtocolConfig> {
        &self.cfg
    }

    fn on_message(&mut self, env: &Envelope, now: Millis, out: &mut Outbox) {
        match env.body.as_ref() {
            Body::SubmissionProgress { count } => {
                self.submissions.report(env.sender.index, *count);
                self.rearm(now);
            }
            Body::Notify { control, value } => match (control, env.sender.cluster) {
                (ControlLoop::Completion, ClusterRole::CompletionMonitor) => {
                    if let Some(v) = self.completion_obs.observe(env.sender.index, *value) {
                        self.on_progress(Progress::unpack(v).commands, now);
                    }
                }
                (ControlLoop::View, ClusterRole::ViewMonitor) => {
                    if let Some(v) = self.view_obs.observe(env.sender.index, *value) {
                        if v > self.adopted {
                            self.adopted = v;
                            out.event(ProtocolEvent::ViewAdopted { view: v });
                            self.report.set(v);
                            if self.deadline.is_some() {
                                self.deadline = Some(now + self.timeout);
                            }
                        }
                    }
                }
                _ => {}
            },
            Body::Rejection { view } => {
                if *view == self.view() {
                    out.event(ProtocolEvent::Rejected { view: *view });
                    self.announce(now, out);
                }
            }
            _ => {}
        }
    }

    fn on_tick(&mut self, now: Millis, out: &mut Outbox) {
        if let Some(d) = self.deadline {
            if now >= d {
                self.announce(now, out);
                self.timeout = self.timeout.saturating_mul(2);
                self.deadline = Some(now + self.timeout);
            }
        }
        let timing = self.cfg.timing;
        self.report.poll(now, &timing, out);
    }
}
