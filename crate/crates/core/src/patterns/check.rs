//! Exhaustive adversary enumeration over the three-symbol domain.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use super::run::rounds;
use super::{rdp_run, relay_run, Crash, NodeFault, PatternInstance, PatternKind, ShowSym, SourceInput, Sym, Variant, DOMAIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// Correct sinks never accept different values.
    Rdp1,
    /// With a correct source every correct sink accepts its value.
    Rdp2,
    /// Accepted values come from a correct source.
    Rp1,
    /// If one correct sink accepts a value, all of them do.
    Rp2,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Rdp1 => "RDP.1",
            Property::Rdp2 => "RDP.2",
            Property::Rp1 => "RP.1",
            Property::Rp2 => "RP.2",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub property: Property,
    pub trace: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("enumeration needs {required} runs, budget is {budget}")]
pub struct ExplosionGuard {
    pub required: u128,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub instance: PatternInstance,
    pub runs: u64,
    /// Violations per checked property.
    pub violations: BTreeMap<Property, u64>,
    /// First counterexample per violated property.
    pub counterexamples: Vec<Counterexample>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.values().all(|v| *v == 0)
    }

    pub fn violations_of(&self, p: Property) -> u64 {
        self.violations.get(&p).copied().unwrap_or(0)
    }

    fn record(&mut self, p: Property, ok: bool, trace: impl FnOnce() -> String) {
        let n = self.violations.entry(p).or_insert(0);
        if !ok {
            *n += 1;
            if *n == 1 {
                self.counterexamples.push(Counterexample { property: p, trace: trace() });
            }
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.instance;
        writeln!(
            f,
            "{:?}/{:?} f={} sources={} middle={} sinks={} t_s={} t_sink={} runs={}",
            i.kind, i.variant, i.f, i.sources, i.middle, i.sinks, i.source_threshold, i.sink_threshold, self.runs
        )?;
        for (p, n) in &self.violations {
            let status = if *n == 0 { "pass" } else { "FAIL" };
            writeln!(f, "  {p}: {status} ({n} counterexamples)")?;
        }
        for c in &self.counterexamples {
            writeln!(f, "  counterexample {}: {}", c.property, c.trace)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checker {
    /// Maximum number of adversary runs.
    pub budget: u64,
    /// Lets the source of a crash-tolerant distribution equivocate, which is
    /// outside its fault model.
    pub cft_equivocation: bool,
}

impl Default for Checker {
    fn default() -> Self {
        Checker {
            budget: 20_000_000,
            cft_equivocation: false,
        }
    }
}

pub fn check_pattern_properties(inst: &PatternInstance) -> Result<Verdict, ExplosionGuard> {
    Checker::default().check(inst)
}

fn pow(b: u128, e: u32) -> u128 {
    b.saturating_pow(e)
}

/// All subsets of `0..n` with at most `k` members, smallest first.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |l: &usize| l + 1);
            for i in start..n {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every vector over the domain of the given length.
fn vectors(len: usize) -> Vec<Vec<Sym>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                DOMAIN.iter().map(move |s| {
                    let mut w = v.clone();
                    w.push(*s);
                    w
                })
            })
            .collect();
    }
    out
}

/// Cartesian product of per-position option lists.
fn product<T: Clone>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for o in opts {
                let mut p = prefix.clone();
                p.push(o.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn show(v: &[Sym]) -> String {
    let parts: Vec<String> = v.iter().map(|s| format!("{}", ShowSym(*s))).collect();
    format!("[{}]", parts.join(","))
}

fn agree(out: &[Sym]) -> bool {
    let mut vals = out.iter().flatten();
    match vals.next() {
        Some(first) => vals.all(|v| v == first),
        None => true,
    }
}

impl Checker {
    pub fn check(&self, inst: &PatternInstance) -> Result<Verdict, ExplosionGuard> {
        let required = self.required(inst);
        if required > u128::from(self.budget) {
            return Err(ExplosionGuard {
                required,
                budget: self.budget,
            });
        }
        let mut verdict = Verdict {
            instance: *inst,
            runs: 0,
            violations: BTreeMap::new(),
            counterexamples: Vec::new(),
        };
        match inst.kind {
            PatternKind::ReliableDistribution => self.check_rdp(inst, &mut verdict),
            PatternKind::Relay => self.check_relay(inst, &mut verdict),
        }
        Ok(verdict)
    }

    /// Number of runs the enumeration would take.
    pub fn required(&self, inst: &PatternInstance) -> u128 {
        let f = inst.f as usize;
        let sinks = inst.sinks;
        match (inst.kind, inst.variant) {
            (PatternKind::ReliableDistribution, Variant::Cft) => {
                if self.cft_equivocation {
                    pow(3, sinks)
                } else {
                    2 * (1 + pow(2, sinks))
                }
            }
            (PatternKind::ReliableDistribution, Variant::Bft) => {
                let m = inst.middle as usize;
                let per = pow(3, sinks);
                let faults: u128 = (0..=f.min(m)).map(|j| binom(m, j) * pow(per, j as u32)).sum();
                pow(3, inst.middle).saturating_mul(faults)
            }
            (PatternKind::Relay, variant) => {
                let n = inst.sources as usize;
                let relays = inst.middle;
                let faulty_source: u128 = match variant {
                    Variant::Cft => 3 * pow(2, relays),
                    Variant::Bft => pow(3, relays),
                };
                let sources: u128 = (0..=f.min(n))
                    .map(|j| binom(n, j) * pow(faulty_source, j as u32) * pow(3, (n - j) as u32))
                    .sum();
                let per_crash = u128::from(rounds(inst)) * pow(2, relays - 1 + sinks);
                let relay_faults: u128 = (0..=f.min(relays as usize))
                    .map(|j| binom(relays as usize, j) * pow(per_crash, j as u32))
                    .sum();
                sources.saturating_mul(relay_faults)
            }
        }
    }

    fn check_rdp(&self, inst: &PatternInstance, v: &mut Verdict) {
        let sinks = inst.sinks as usize;
        match inst.variant {
            Variant::Cft => {
                let behaviours: Vec<(Vec<Sym>, bool)> = if self.cft_equivocation {
                    vectors(sinks)
                        .into_iter()
                        .map(|b| {
                            let correct = b[0].is_some() && b.iter().all(|x| *x == b[0]);
                            (b, correct)
                        })
                        .collect()
                } else {
                    let mut out = Vec::new();
                    for val in DOMAIN.iter().flatten() {
                        out.push((vec![Some(*val); sinks], true));
                        for mask in 0..(1u32 << sinks) {
                            let b = (0..sinks).map(|s| Some(*val).filter(|_| mask & (1 << s) != 0)).collect();
                            out.push((b, false));
                        }
                    }
                    out
                };
                for (b, correct) in behaviours {
                    let out = rdp_run(inst, &b, &[]);
                    v.runs += 1;
                    self.judge_rdp(v, &out, correct.then_some(b[0]).flatten(), || {
                        format!("source sends {} sinks accept {}", show(&b), show(&out))
                    });
                }
            }
            Variant::Bft => {
                let m = inst.middle as usize;
                let fault_sets = subsets(m, inst.f as usize);
                let lies = vectors(sinks);
                for b in vectors(m) {
                    let correct = b[0].filter(|_| b.iter().all(|x| *x == b[0]));
                    for set in &fault_sets {
                        let choices: Vec<Vec<Vec<Sym>>> = set.iter().map(|_| lies.clone()).collect();
                        for pick in product(&choices) {
                            let faults: Vec<(usize, NodeFault)> =
                                set.iter().zip(pick).map(|(w, l)| (*w, NodeFault::Byzantine(l))).collect();
                            let out = rdp_run(inst, &b, &faults);
                            v.runs += 1;
                            self.judge_rdp(v, &out, correct, || {
                                let fs: Vec<String> = faults
                                    .iter()
                                    .map(|(w, f)| match f {
                                        NodeFault::Byzantine(l) => format!("w{w}:{}", show(l)),
                                        NodeFault::Crash(c) => format!("w{w}:crash{c:?}"),
                                    })
                                    .collect();
                                format!(
                                    "source sends {} faulty witnesses {{{}}} sinks accept {}",
                                    show(&b),
                                    fs.join(" "),
                                    show(&out)
                                )
                            });
                        }
                    }
                }
            }
        }
    }

    fn judge_rdp(&self, v: &mut Verdict, out: &[Sym], correct: Sym, trace: impl Fn() -> String) {
        v.record(Property::Rdp1, agree(out), &trace);
        if let Some(val) = correct {
            v.record(Property::Rdp2, out.iter().all(|s| *s == Some(val)), &trace);
        } else {
            v.violations.entry(Property::Rdp2).or_insert(0);
        }
    }

    fn check_relay(&self, inst: &PatternInstance, v: &mut Verdict) {
        let n = inst.sources as usize;
        let relays = inst.middle as usize;
        let recipients = relays - 1 + inst.sinks as usize;
        let correct_opts: Vec<SourceInput> = DOMAIN.iter().map(|s| SourceInput::Correct(*s)).collect();
        let faulty_opts: Vec<SourceInput> = match inst.variant {
            Variant::Cft => DOMAIN
                .iter()
                .flat_map(|s| (0..(1u32 << relays)).map(move |reached| SourceInput::Crashed { value: *s, reached }))
                .collect(),
            Variant::Bft => vectors(relays).into_iter().map(SourceInput::Byzantine).collect(),
        };
        let crash_opts: Vec<Crash> = (0..rounds(inst))
            .flat_map(|round| (0..(1u32 << recipients)).map(move |reached| Crash { round, reached }))
            .collect();
        let mut relay_faults: Vec<Vec<(usize, Crash)>> = Vec::new();
        for set in subsets(relays, inst.f as usize) {
            let choices: Vec<Vec<Crash>> = set.iter().map(|_| crash_opts.clone()).collect();
            for pick in product(&choices) {
                relay_faults.push(set.iter().copied().zip(pick).collect());
            }
        }
        for set in subsets(n, inst.f as usize) {
            let choices: Vec<Vec<SourceInput>> = (0..n)
                .map(|i| if set.contains(&i) { faulty_opts.clone() } else { correct_opts.clone() })
                .collect();
            for sources in product(&choices) {
                let legit: Vec<Sym> = sources
                    .iter()
                    .filter_map(|s| match s {
                        SourceInput::Correct(x) => Some(*x),
                        SourceInput::Crashed { value, .. } => Some(*value),
                        SourceInput::Byzantine(_) => None,
                    })
                    .collect();
                for rf in &relay_faults {
                    let out = relay_run(inst, &sources, rf);
                    v.runs += 1;
                    let trace = || format!("sources {sources:?} relay crashes {rf:?} sinks accept {}", show(&out));
                    let proposed = out.iter().flatten().all(|x| legit.contains(&Some(*x)));
                    v.record(Property::Rp1, proposed, trace);
                    let all_or_none = out.iter().all(|s| *s == out[0]);
                    v.record(Property::Rp2, all_or_none, trace);
                }
            }
        }
    }
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_up_to_two() {
        assert_eq!(subsets(3, 2).len(), 1 + 3 + 3);
        assert_eq!(subsets(4, 1).len(), 5);
    }

    #[test]
    fn required_matches_runs() {
        for inst in [
            PatternInstance::rdp_cft(1, 3),
            PatternInstance::rdp_bft(1, 2),
            PatternInstance::relay_cft(1, 1),
        ] {
            let c = Checker::default();
            let v = c.check(&inst).unwrap();
            assert_eq!(u128::from(v.runs), c.required(&inst), "{inst:?}");
        }
    }

    #[test]
    fn bft_rdp_holds() {
        let v = check_pattern_properties(&PatternInstance::rdp_bft(1, 3)).unwrap();
        assert!(v.passed(), "{v}");
        assert!(v.runs > 0);
    }

    #[test]
    fn equivocation_breaks_cft_rdp() {
        let c = Checker {
            cft_equivocation: true,
            ..Checker::default()
        };
        let v = c.check(&PatternInstance::rdp_cft(1, 3)).unwrap();
        assert!(v.violations_of(Property::Rdp1) > 0);
        assert_eq!(v.counterexamples[0].property, Property::Rdp1);
    }

    #[test]
    fn witness_threshold_too_low_is_caught() {
        let mut inst = PatternInstance::rdp_bft(1, 2);
        inst.sink_threshold = 2;
        let v = check_pattern_properties(&inst).unwrap();
        assert!(v.violations_of(Property::Rdp1) > 0);
    }

    #[test]
    fn relay_source_threshold_too_low_is_caught() {
        let mut inst = PatternInstance::relay_cft(1, 2);
        inst.source_threshold = 1;
        let v = check_pattern_properties(&inst).unwrap();
        assert!(v.violations_of(Property::Rp2) > 0);
    }

    #[test]
    fn guard_trips_on_large_instances() {
        let c = Checker {
            budget: 1000,
            ..Checker::default()
        };
        let e = c.check(&PatternInstance::relay_bft(1, 2)).unwrap_err();
        assert!(e.required > 1000);
    }
}
