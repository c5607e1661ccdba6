//! Throughput, latency and view-change figures derived from a trace.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::trace::{SimTrace, TraceEvent};
use crate::command::CommandId;
use crate::ids::{ClusterRole, Millis};

pub const BUCKET: Millis = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bucket {
    pub start: Millis,
    /// Commands first executed by an honest executor in this bucket.
    pub committed: u64,
    /// Mean submit-to-reply latency of replies received in this bucket.
    pub mean_latency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewChange {
    pub view: u64,
    pub announced: Millis,
    /// When the first proposer moved to the view.
    pub adopted: Option<Millis>,
}

impl ViewChange {
    pub fn duration(&self) -> Option<Millis> {
        self.adopted.map(|a| a.saturating_sub(self.announced))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub horizon: Millis,
    pub buckets: Vec<Bucket>,
    /// Sorted first-execution times, one per command.
    pub executions: Vec<Millis>,
    /// Sorted submit-to-reply latencies.
    pub latencies: Vec<Millis>,
    pub view_changes: Vec<ViewChange>,
    pub submitted: u64,
    pub replied: u64,
}

impl Metrics {
    pub fn from_trace(trace: &SimTrace) -> Self {
        let faults = trace.faults();
        let horizon = trace.header.horizon;
        let mut submitted: BTreeMap<CommandId, Millis> = BTreeMap::new();
        let mut executed: BTreeMap<CommandId, Millis> = BTreeMap::new();
        let mut replied: BTreeMap<CommandId, Millis> = BTreeMap::new();
        let mut announced: BTreeMap<u64, Millis> = BTreeMap::new();
        let mut adopted: BTreeMap<u64, Millis> = BTreeMap::new();
        for r in &trace.records {
            match &r.event {
                TraceEvent::Submit { id, .. } => {
                    submitted.entry(*id).or_insert(r.time);
                }
                TraceEvent::Execute {
                    id: Some(id),
                    duplicate: false,
                    ..
                } if faults.honest(r.node) => {
                    executed.entry(*id).or_insert(r.time);
                }
                TraceEvent::Reply { id, .. } => {
                    replied.entry(*id).or_insert(r.time);
                }
                TraceEvent::ViewAnnounce { view } if *view > 0 => {
                    announced.entry(*view).or_insert(r.time);
                }
                TraceEvent::ViewAdopt { view } if *view > 0 && r.node.cluster == ClusterRole::Proposer => {
                    adopted.entry(*view).or_insert(r.time);
                }
                _ => {}
            }
        }

        let n = (horizon / BUCKET + 1) as usize;
        let mut buckets: Vec<Bucket> = (0..n)
            .map(|i| Bucket {
                start: i as Millis * BUCKET,
                ..Bucket::default()
            })
            .collect();
        let slot = |t: Millis| ((t / BUCKET) as usize).min(n - 1);
        for t in executed.values() {
            buckets[slot(*t)].committed += 1;
        }
        let mut sums: Vec<(u64, u64)> = alloc::vec![(0, 0); n];
        let mut latencies = Vec::new();
        for (id, t) in &replied {
            if let Some(s) = submitted.get(id) {
                let l = t.saturating_sub(*s);
                latencies.push(l);
                let b = &mut sums[slot(*t)];
                b.0 += l;
                b.1 += 1;
            }
        }
        for (b, (sum, count)) in buckets.iter_mut().zip(sums) {
            if count > 0 {
                b.mean_latency = Some(sum as f64 / count as f64);
            }
        }
        latencies.sort_unstable();
        let mut executions: Vec<Millis> = executed.values().copied().collect();
        executions.sort_unstable();

        let views: BTreeSet<u64> = announced.keys().chain(adopted.keys()).copied().collect();
        let view_changes = views
            .into_iter()
            .map(|view| {
                let adopted = adopted.get(&view).copied();
                ViewChange {
                    view,
                    announced: announced.get(&view).copied().or(adopted).unwrap_or(0),
                    adopted,
                }
            })
            .collect();

        Metrics {
            horizon,
            buckets,
            executions,
            latencies,
            view_changes,
            submitted: submitted.len() as u64,
            replied: replied.len() as u64,
        }
    }

    pub fn committed(&self) -> u64 {
        self.executions.len() as u64
    }

    /// Nearest-rank percentile of the latency, `p` in (0, 100].
    pub fn latency_percentile(&self, p: f64) -> Option<Millis> {
        if self.latencies.is_empty() {
            return None;
        }
        let x = (p / 100.0) * self.latencies.len() as f64;
        let mut rank = x as usize;
        if (rank as f64) < x {
            rank += 1;
        }
        Some(self.latencies[rank.clamp(1, self.latencies.len()) - 1])
    }

    pub fn mean_latency(&self) -> Option<f64> {
        if self.latencies.is_empty() {
            return None;
        }
        Some(self.latencies.iter().sum::<Millis>() as f64 / self.latencies.len() as f64)
    }

    /// Longest stretch within `[from, until]` in which no new command was
    /// executed. The stretch is open at both ends, so a run that stops for
    /// good reports the distance to `until`.
    pub fn largest_gap(&self, from: Millis, until: Millis) -> Millis {
        let mut last = from;
        let mut gap = 0;
        for t in self.executions.iter().copied().filter(|t| *t >= from && *t <= until) {
            gap = gap.max(t - last);
            last = t;
        }
        gap.max(until.saturating_sub(last))
    }

    /// Commands executed per whole second.
    pub fn per_second(&self) -> Vec<u64> {
        let mut out = alloc::vec![0; (self.horizon / 1000 + 1) as usize];
        for t in &self.executions {
            out[(*t / 1000) as usize] += 1;
        }
        out
    }

    /// Mean of `per_second` over `[from, until)` in whole seconds.
    pub fn throughput(&self, from: Millis, until: Millis) -> f64 {
        let secs = until.saturating_sub(from) as f64 / 1000.0;
        if secs <= 0.0 {
            return 0.0;
        }
        let n = self.executions.iter().filter(|t| **t >= from && **t < until).count();
        n as f64 / secs
    }
}
