//! Fault script files. One directive per line, `#` starts a comment:
//!
//! ```text
//! 2000 crash proposer/0
//! 300 equivocate-proposals proposer/0
//! 0 crash machine/4
//! partition 3000 4500 0,1,2
//! gst 1500
//! drop 0.05
//! reorder 20
//! delay 1 5
//! ```
//!
//! Network directives adjust the network model the run starts from.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use shellft_core::sim::{FaultKind, FaultScript, NetworkModel, Partition, Target};
use shellft_core::ReplicaId;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptFile {
    pub faults: FaultScript,
    pub network: NetworkModel,
}

fn parse_target(s: &str) -> Result<Target> {
    if let Some(m) = s.strip_prefix("machine/") {
        return Ok(Target::Machine(m.parse().map_err(|_| anyhow!("bad machine `{s}`"))?));
    }
    Ok(Target::Replica(s.parse::<ReplicaId>()?))
}

fn num<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    let s = s.ok_or_else(|| anyhow!("missing {what}"))?;
    s.parse().map_err(|_| anyhow!("bad {what} `{s}`"))
}

pub fn parse(text: &str) -> Result<ScriptFile> {
    let mut out = ScriptFile::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut w = line.split_whitespace();
        let head = w.next().unwrap_or_default();
        let res: Result<()> = (|| {
            match head {
                "partition" => {
                    let from = num(w.next(), "start")?;
                    let until = num(w.next(), "end")?;
                    let side: BTreeSet<u16> = w
                        .next()
                        .ok_or_else(|| anyhow!("missing machine list"))?
                        .split(',')
                        .map(|m| m.parse().map_err(|_| anyhow!("bad machine `{m}`")))
                        .collect::<Result<_>>()?;
                    if until <= from {
                        bail!("partition ends before it starts");
                    }
                    out.network.partitions.push(Partition { from, until, side });
                }
                "gst" => out.network.gst = num(w.next(), "time")?,
                "drop" => {
                    let p: f64 = num(w.next(), "probability")?;
                    if !(0.0..=1.0).contains(&p) {
                        bail!("drop probability outside [0, 1]");
                    }
                    out.network.drop_ppm = (p * 1e6).round() as u32;
                }
                "reorder" => out.network.reorder_window = num(w.next(), "window")?,
                "delay" => {
                    out.network.min_delay = num(w.next(), "minimum delay")?;
                    out.network.max_delay = num(w.next(), "maximum delay")?;
                    if out.network.max_delay < out.network.min_delay {
                        bail!("maximum delay below minimum");
                    }
                }
                t => {
                    let at = t.parse().map_err(|_| anyhow!("unknown directive `{t}`"))?;
                    let kind: FaultKind = num(w.next(), "fault kind")?;
                    let target = parse_target(w.next().ok_or_else(|| anyhow!("missing target"))?)?;
                    out.faults.entries.push(shellft_core::sim::FaultEntry { at, target, kind });
                }
            }
            if let Some(extra) = w.next() {
                bail!("unexpected `{extra}`");
            }
            Ok(())
        })();
        res.with_context(|| format!("fault script line {}", n + 1))?;
    }
    Ok(out)
}

/// Inverse of [`parse`] for the fields it understands.
pub fn render(s: &ScriptFile) -> String {
    let mut out = String::new();
    let d = NetworkModel::default();
    let net = &s.network;
    if (net.min_delay, net.max_delay) != (d.min_delay, d.max_delay) {
        writeln!(out, "delay {} {}", net.min_delay, net.max_delay).unwrap();
    }
    if net.gst != 0 {
        writeln!(out, "gst {}", net.gst).unwrap();
    }
    if net.drop_ppm != 0 {
        writeln!(out, "drop {}", f64::from(net.drop_ppm) / 1e6).unwrap();
    }
    if net.reorder_window != 0 {
        writeln!(out, "reorder {}", net.reorder_window).unwrap();
    }
    for p in &net.partitions {
        let side: Vec<String> = p.side.iter().map(|m| m.to_string()).collect();
        writeln!(out, "partition {} {} {}", p.from, p.until, side.join(",")).unwrap();
    }
    for e in &s.faults.entries {
        writeln!(out, "{} {} {}", e.at, e.kind, e.target).unwrap();
    }
    out
}
