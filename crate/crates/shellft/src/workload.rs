//! Seeded update-heavy key-value workload with Zipfian key popularity.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Zipf};
use shellft_core::kv::{Fields, KvCommand, KvOp};
use shellft_core::sim::{WorkItem, Workload};
use shellft_core::Millis;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub clients: u32,
    /// Commands per simulated second, summed over all clients.
    pub rate: f64,
    /// Share of updates; the rest are reads.
    pub updates: f64,
    pub keys: u32,
    pub zipf: f64,
    pub fields: u32,
    pub field_size: usize,
    pub start: Millis,
    /// No submissions at or after this time; `None` runs to the horizon.
    pub until: Option<Millis>,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            clients: 4,
            rate: 200.0,
            updates: 0.5,
            keys: 1000,
            zipf: 0.99,
            fields: 10,
            field_size: 100,
            start: 10,
            until: None,
            seed: 0,
        }
    }
}

/// `clients=4,rate=200,updates=0.5,keys=1000,zipf=0.99,fields=10,field-size=100,start=10,until=9000,seed=1`;
/// every key is optional.
impl FromStr for WorkloadSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut w = WorkloadSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{part}`"))?;
            let bad = || anyhow!("bad value `{v}` for `{k}`");
            match k {
                "clients" => w.clients = v.parse().map_err(|_| bad())?,
                "rate" => w.rate = v.parse().map_err(|_| bad())?,
                "updates" | "ratio" => w.updates = v.parse().map_err(|_| bad())?,
                "keys" => w.keys = v.parse().map_err(|_| bad())?,
                "zipf" => w.zipf = v.parse().map_err(|_| bad())?,
                "fields" => w.fields = v.parse().map_err(|_| bad())?,
                "field-size" => w.field_size = v.parse().map_err(|_| bad())?,
                "start" => w.start = v.parse().map_err(|_| bad())?,
                "until" => w.until = Some(v.parse().map_err(|_| bad())?),
                "seed" => w.seed = v.parse().map_err(|_| bad())?,
                _ => bail!("unknown workload key `{k}`"),
            }
        }
        w.check()?;
        Ok(w)
    }
}

fn key_name(k: u32) -> String {
    format!("user{k:05}")
}

fn field_value(rng: &mut ChaCha8Rng, len: usize) -> Arc<[u8]> {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

impl WorkloadSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            bail!("rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.updates) {
            bail!("update share must lie in [0, 1]");
        }
        if self.clients == 0 || self.keys == 0 || self.fields == 0 {
            bail!("clients, keys and fields must be positive");
        }
        if !(self.zipf >= 0.0) {
            bail!("zipf exponent must be non-negative");
        }
        Ok(())
    }

    /// Key index in `0..keys`; index 0 is the most popular.
    fn sampler(&self) -> Zipf<f64> {
        Zipf::new(f64::from(self.keys), self.zipf).expect("validated parameters")
    }

    /// The time-ordered submissions. A key's first update writes the whole
    /// record; later updates overwrite one field.
    pub fn generate(&self, horizon: Millis) -> Workload {
        self.check().expect("valid workload spec");
        let until = self.until.unwrap_or(horizon).min(horizon);
        let per_client = Exp::new(self.rate / f64::from(self.clients) / 1000.0).expect("positive rate");
        let zipf = self.sampler();
        let mut ops: Vec<(Millis, u32, bool, u32)> = Vec::new();
        for c in 0..self.clients {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from(c).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut t = self.start as f64 + per_client.sample(&mut rng);
            while (t as Millis) < until {
                let key = zipf.sample(&mut rng) as u32 - 1;
                let update = rng.random_bool(self.updates);
                ops.push((t as Millis, c, update, key));
                t += per_client.sample(&mut rng);
            }
        }
        ops.sort_by_key(|o| (o.0, o.1));

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.rotate_left(29) ^ 0x7061_796c_6f61_64);
        let mut written = BTreeSet::new();
        let items = ops
            .into_iter()
            .map(|(at, client, update, key)| {
                let mut fields = Fields::new();
                let op = if !update {
                    KvOp::Get
                } else if written.insert(key) {
                    for i in 0..self.fields {
                        fields.insert(format!("field{i}"), field_value(&mut rng, self.field_size));
                    }
                    KvOp::Put
                } else {
                    let i = rng.random_range(0..self.fields);
                    fields.insert(format!("field{i}"), field_value(&mut rng, self.field_size));
                    KvOp::Update
                };
                let cmd = KvCommand {
                    op,
                    key: key_name(key),
                    fields,
                };
                WorkItem {
                    at,
                    client,
                    payload: Arc::from(cmd.encode()),
                }
            })
            .collect();
        Workload {
            clients: self.clients,
            items,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(w: &Workload) -> Vec<KvCommand> {
        w.items.iter().map(|i| KvCommand::decode(&i.payload).unwrap()).collect()
    }

    #[test]
    fn same_seed_same_stream() {
        let s = WorkloadSpec { seed: 4, ..WorkloadSpec::default() };
        assert_eq!(s.generate(3000), s.generate(3000));
        let t = WorkloadSpec { seed: 5, ..WorkloadSpec::default() };
        assert_ne!(s.generate(3000), t.generate(3000));
    }

    #[test]
    fn all_updates_means_no_reads() {
        let s = WorkloadSpec { updates: 1.0, ..WorkloadSpec::default() };
        let cmds = decode(&s.generate(5000));
        assert!(!cmds.is_empty());
        assert!(cmds.iter().all(|c| c.op != KvOp::Get));
    }

    #[test]
    fn first_write_puts_a_full_record() {
        let s = WorkloadSpec { updates: 1.0, keys: 5, ..WorkloadSpec::default() };
        let mut seen = BTreeSet::new();
        for c in decode(&s.generate(2000)) {
            if seen.insert(c.key.clone()) {
                assert_eq!(c.op, KvOp::Put);
                assert_eq!(c.fields.len(), 10);
                assert!(c.fields.values().all(|v| v.len() == 100));
            } else {
                assert_eq!(c.op, KvOp::Update);
                assert_eq!(c.fields.len(), 1);
            }
        }
    }

    #[test]
    fn rate_and_ratio_are_respected() {
        let s = WorkloadSpec { rate: 400.0, seed: 9, ..WorkloadSpec::default() };
        let w = s.generate(20_000);
        let n = w.items.len() as f64;
        assert!((n - 400.0 * 20.0).abs() < 400.0, "{n}");
        let reads = decode(&w).iter().filter(|c| c.op == KvOp::Get).count() as f64;
        assert!((reads / n - 0.5).abs() < 0.03);
        assert!(w.items.windows(2).all(|p| p[0].at <= p[1].at));
    }

    #[test]
    fn zipf_head_matches_the_closed_form() {
        let s = WorkloadSpec::default();
        let zipf = s.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trials = 200_000;
        let mut hits = 0u32;
        for _ in 0..trials {
            if zipf.sample(&mut rng) as u32 == 1 {
                hits += 1;
            }
        }
        // P(rank 1) = 1 / sum_{k=1}^{n} k^-s
        let h: f64 = (1..=1000).map(|k| (k as f64).powf(-0.99)).sum();
        let expected = 1.0 / h;
        let observed = f64::from(hits) / trials as f64;
        assert!(observed > 1.0 / 1000.0);
        assert!((observed - expected).abs() < 0.005, "{observed} vs {expected}");
    }

    #[test]
    fn spec_strings_parse() {
        let s: WorkloadSpec = "clients=2, rate=50,updates=1,until=900".parse().unwrap();
        assert_eq!((s.clients, s.rate, s.updates, s.until), (2, 50.0, 1.0, Some(900)));
        assert!("rate=0".parse::<WorkloadSpec>().is_err());
        assert!("colour=red".parse::<WorkloadSpec>().is_err());
    }
}
