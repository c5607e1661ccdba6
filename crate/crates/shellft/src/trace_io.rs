//! Line-oriented trace files: one record per line, fields in a fixed order.
//!
//! ```text
//! shellft-trace 1
//! header shell=front-end,executor f=1 seed=7 horizon=10000 gst=0 clients=4 executors=4
//! 20 client/0 submit id=0:0 low=0 payload=0304...
//! 31 executor/2 execute seq=0 id=0:0 reply=8c3f09a1d2e4b6f0 dup=0
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use shellft_core::sim::{FaultKind, SimTrace, TraceEvent, TraceHeader, TraceRecord};
use shellft_core::{CommandId, Coordinates, Digest, MessageKind, ReplicaId};

pub const MAGIC: &str = "shellft-trace 1";

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn unhex(s: &str) -> Result<Vec<u8>> {
    if s.len() % 2 != 0 {
        bail!("odd-length hex string");
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| anyhow!("bad hex `{s}`")))
        .collect()
}

fn id(id: CommandId) -> String {
    format!("{}:{}", id.client, id.counter)
}

fn opt_id(v: Option<CommandId>) -> String {
    v.map_or_else(|| "-".into(), id)
}

fn digest(d: Digest) -> String {
    format!("{d:016x}")
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

pub fn format_record(r: &TraceRecord) -> String {
    let body = match &r.event {
        TraceEvent::Fault { kind } => format!("kind={kind}"),
        TraceEvent::Submit { id: c, client_low, payload } => {
            format!("id={} low={client_low} payload={}", id(*c), hex(payload))
        }
        TraceEvent::Deliver { from, kind, coords } => {
            let c = coords.map_or_else(|| "-".into(), |c| format!("{}.{}", c.view, c.seq));
            format!("from={from} kind={kind} coords={c}")
        }
        TraceEvent::Accept { id: c } => format!("id={}", id(*c)),
        TraceEvent::Commit { view, seq, digest: d, id: c } => {
            format!("view={view} seq={seq} digest={} id={}", digest(*d), opt_id(*c))
        }
        TraceEvent::Execute { seq, id: c, reply, duplicate } => format!(
            "seq={seq} id={} reply={} dup={}",
            opt_id(*c),
            reply.map_or_else(|| "-".into(), digest),
            flag(*duplicate)
        ),
        TraceEvent::Checkpoint { seq, digest: d, installed } => {
            format!("seq={seq} digest={} installed={}", digest(*d), flag(*installed))
        }
        TraceEvent::ViewAnnounce { view } | TraceEvent::ViewAdopt { view } | TraceEvent::Reject { view } => {
            format!("view={view}")
        }
        TraceEvent::NewView { view, start, end } => format!("view={view} start={start} end={end}"),
        TraceEvent::Decide { view, digest: d } => format!("view={view} digest={}", digest(*d)),
        TraceEvent::Reply { id: c, digest: d } => format!("id={} digest={}", id(*c), digest(*d)),
        // free text goes last
        TraceEvent::Alarm { what, seq } => format!("seq={seq} what={what}"),
    };
    format!("{} {} {} {}", r.time, r.node, r.event.name(), body)
}

pub fn format_header(h: &TraceHeader) -> String {
    format!(
        "header shell={} f={} seed={} horizon={} gst={} clients={} executors={}",
        if h.shell.is_empty() { "-" } else { &h.shell },
        h.f,
        h.seed,
        h.horizon,
        h.gst,
        h.clients,
        h.executors
    )
}

pub fn write_trace(t: &SimTrace) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format_header(&t.header));
    out.push('\n');
    for r in &t.records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

struct Fields<'a> {
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(parts: &[&'a str]) -> Result<Self> {
        let mut map = HashMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{p}`"))?;
            map.insert(k, v);
        }
        Ok(Fields { map })
    }

    fn raw(&self, k: &str) -> Result<&'a str> {
        self.map.get(k).copied().ok_or_else(|| anyhow!("missing field `{k}`"))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        let v = self.raw(k)?;
        v.parse().map_err(|_| anyhow!("bad number `{v}` for `{k}`"))
    }

    fn digest(&self, k: &str) -> Result<Digest> {
        let v = self.raw(k)?;
        Digest::from_str_radix(v, 16).map_err(|_| anyhow!("bad digest `{v}`"))
    }

    fn opt_digest(&self, k: &str) -> Result<Option<Digest>> {
        if self.raw(k)? == "-" {
            return Ok(None);
        }
        self.digest(k).map(Some)
    }

    fn id(&self, k: &str) -> Result<CommandId> {
        parse_id(self.raw(k)?)
    }

    fn opt_id(&self, k: &str) -> Result<Option<CommandId>> {
        match self.raw(k)? {
            "-" => Ok(None),
            v => parse_id(v).map(Some),
        }
    }

    fn flag(&self, k: &str) -> Result<bool> {
        match self.raw(k)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => bail!("bad flag `{v}` for `{k}`"),
        }
    }
}

fn parse_id(s: &str) -> Result<CommandId> {
    let (c, n) = s.split_once(':').ok_or_else(|| anyhow!("bad command id `{s}`"))?;
    Ok(CommandId::new(
        c.parse().map_err(|_| anyhow!("bad command id `{s}`"))?,
        n.parse().map_err(|_| anyhow!("bad command id `{s}`"))?,
    ))
}

pub fn parse_record(line: &str) -> Result<TraceRecord> {
    let mut it = line.splitn(4, ' ');
    let time = it.next().unwrap_or_default().parse().context("bad time")?;
    let node: ReplicaId = it.next().ok_or_else(|| anyhow!("missing node"))?.parse()?;
    let name = it.next().ok_or_else(|| anyhow!("missing event"))?;
    let rest = it.next().unwrap_or("");
    if name == "alarm" {
        let (seq, what) = rest
            .strip_prefix("seq=")
            .and_then(|r| r.split_once(" what="))
            .ok_or_else(|| anyhow!("bad alarm record"))?;
        let event = TraceEvent::Alarm {
            what: what.to_string(),
            seq: seq.parse().context("bad alarm seq")?,
        };
        return Ok(TraceRecord { time, node, event });
    }
    let parts: Vec<&str> = rest.split_whitespace().collect();
    let f = Fields::parse(&parts)?;
    let event = match name {
        "fault" => TraceEvent::Fault {
            kind: f.raw("kind")?.parse::<FaultKind>()?,
        },
        "submit" => TraceEvent::Submit {
            id: f.id("id")?,
            client_low: f.num("low")?,
            payload: Arc::from(unhex(f.raw("payload")?)?),
        },
        "deliver" => TraceEvent::Deliver {
            from: f.raw("from")?.parse()?,
            kind: f.raw("kind")?.parse::<MessageKind>().map_err(|e| anyhow!("{e}"))?,
            coords: match f.raw("coords")? {
                "-" => None,
                c => {
                    let (v, s) = c.split_once('.').ok_or_else(|| anyhow!("bad coordinates `{c}`"))?;
                    Some(Coordinates::new(v.parse()?, s.parse()?))
                }
            },
        },
        "accept" => TraceEvent::Accept { id: f.id("id")? },
        "commit" => TraceEvent::Commit {
            view: f.num("view")?,
            seq: f.num("seq")?,
            digest: f.digest("digest")?,
            id: f.opt_id("id")?,
        },
        "execute" => TraceEvent::Execute {
            seq: f.num("seq")?,
            id: f.opt_id("id")?,
            reply: f.opt_digest("reply")?,
            duplicate: f.flag("dup")?,
        },
        "checkpoint" => TraceEvent::Checkpoint {
            seq: f.num("seq")?,
            digest: f.digest("digest")?,
            installed: f.flag("installed")?,
        },
        "view-announce" => TraceEvent::ViewAnnounce { view: f.num("view")? },
        "view-adopt" => TraceEvent::ViewAdopt { view: f.num("view")? },
        "reject" => TraceEvent::Reject { view: f.num("view")? },
        "new-view" => TraceEvent::NewView {
            view: f.num("view")?,
            start: f.num("start")?,
            end: f.num("end")?,
        },
        "decide" => TraceEvent::Decide {
            view: f.num("view")?,
            digest: f.digest("digest")?,
        },
        "reply" => TraceEvent::Reply {
            id: f.id("id")?,
            digest: f.digest("digest")?,
        },
        other => bail!("unknown event `{other}`"),
    };
    Ok(TraceRecord { time, node, event })
}

pub fn parse_header(line: &str) -> Result<TraceHeader> {
    let rest = line.strip_prefix("header ").ok_or_else(|| anyhow!("missing header line"))?;
    let parts: Vec<&str> = rest.split_whitespace().collect();
    let f = Fields::parse(&parts)?;
    Ok(TraceHeader {
        shell: match f.raw("shell")? {
            "-" => String::new(),
            s => s.to_string(),
        },
        f: f.num("f")?,
        seed: f.num("seed")?,
        horizon: f.num("horizon")?,
        gst: f.num("gst")?,
        clients: f.num("clients")?,
        executors: f.num("executors")?,
    })
}

pub fn read_trace(text: &str) -> Result<SimTrace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => bail!("not a trace file (expected `{MAGIC}`)"),
    }
    let (_, h) = lines.next().ok_or_else(|| anyhow!("missing header line"))?;
    let header = parse_header(h)?;
    let mut records = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(line).with_context(|| format!("line {}", n + 1))?);
    }
    Ok(SimTrace { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use shellft_core::ClusterRole;

    #[test]
    fn every_event_round_trips() {
        let n = ReplicaId::new(ClusterRole::Executor, 2);
        let c = CommandId::new(1, 7);
        let events = vec![
            TraceEvent::Fault { kind: FaultKind::ForgeReply },
            TraceEvent::Submit { id: c, client_low: 3, payload: Arc::from(&[0u8, 255, 16][..]) },
            TraceEvent::Deliver { from: n, kind: MessageKind::Proposal, coords: Some(Coordinates::new(1, 9)) },
            TraceEvent::Deliver { from: n, kind: MessageKind::Request, coords: None },
            TraceEvent::Accept { id: c },
            TraceEvent::Commit { view: 1, seq: 4, digest: 0xabc, id: None },
            TraceEvent::Execute { seq: 4, id: Some(c), reply: Some(u64::MAX), duplicate: true },
            TraceEvent::Execute { seq: 5, id: None, reply: None, duplicate: false },
            TraceEvent::Checkpoint { seq: 64, digest: 1, installed: true },
            TraceEvent::ViewAnnounce { view: 2 },
            TraceEvent::ViewAdopt { view: 2 },
            TraceEvent::NewView { view: 2, start: 10, end: 12 },
            TraceEvent::Decide { view: 2, digest: 5 },
            TraceEvent::Reject { view: 3 },
            TraceEvent::Reply { id: c, digest: 77 },
            TraceEvent::Alarm { what: "ambiguous commit quorum".into(), seq: 8 },
        ];
        let trace = SimTrace {
            header: TraceHeader { f: 1, seed: 9, horizon: 100, executors: 4, ..TraceHeader::default() },
            records: events
                .into_iter()
                .enumerate()
                .map(|(i, event)| TraceRecord { time: i as u64, node: n, event })
                .collect(),
        };
        let text = write_trace(&trace);
        assert_eq!(read_trace(&text).unwrap(), trace);
        assert_eq!(write_trace(&read_trace(&text).unwrap()), text);
    }

    #[test]
    fn garbage_is_rejected_with_a_line_number() {
        let text = format!("{MAGIC}\nheader shell=- f=1 seed=0 horizon=1 gst=0 clients=1 executors=3\n5 executor/0 explode\n");
        let err = read_trace(&text).unwrap_err();
        assert!(format!("{err:#}").contains("line 3"));
        assert!(read_trace("hello").is_err());
    }
}
