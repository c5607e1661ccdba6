//! Probability that `k` successful exploits take the whole system down.
//!
//! Each exploit disables one uniformly chosen, not yet disabled machine (or
//! configuration). The system fails once any group has more disabled members
//! than it tolerates.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use super::SystemBlueprint;
use crate::ids::ClusterRole;

/// Exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Ratio {
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    pub members: u32,
    pub tolerance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeploymentModel {
    pub groups: Vec<Group>,
}

pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

impl DeploymentModel {
    /// One cluster of 2f+1 replicas on 2f+1 machines sharing one
    /// configuration per machine.
    pub fn monolithic(f: u32) -> Self {
        DeploymentModel {
            groups: vec![Group {
                members: 2 * f + 1,
                tolerance: f,
            }],
        }
    }

    /// Two groups of machines, each tolerating f losses.
    pub fn group_based(shell_machines: u32, other_machines: u32, f: u32) -> Self {
        DeploymentModel {
            groups: vec![
                Group {
                    members: shell_machines,
                    tolerance: f,
                },
                Group {
                    members: other_machines,
                    tolerance: f,
                },
            ],
        }
    }

    /// Every replica of the base protocol runs its own configuration; each
    /// cluster tolerates f losses.
    pub fn fully_diversified(f: u32) -> Self {
        let groups = ClusterRole::BASE
            .iter()
            .map(|r| Group {
                members: if *r == ClusterRole::Proposer { f + 1 } else { 2 * f + 1 },
                tolerance: f,
            })
            .collect();
        DeploymentModel { groups }
    }

    /// The machine groups of a tailored deployment.
    pub fn from_blueprint(bp: &SystemBlueprint) -> Self {
        DeploymentModel {
            groups: bp
                .deployment
                .groups
                .iter()
                .filter(|g| !g.machines.is_empty())
                .map(|g| Group {
                    members: g.machines.len() as u32,
                    tolerance: bp.f,
                })
                .collect(),
        }
    }

    pub fn targets(&self) -> u32 {
        self.groups.iter().map(|g| g.members).sum()
    }

    /// Closed form: one minus the share of k-subsets that respect every
    /// group's tolerance.
    pub fn exact(&self, k: u32) -> Ratio {
        let n = self.targets();
        if k > n {
            return Ratio::new(1, 1);
        }
        // survivable[j] = ways to disable j targets without failure
        let mut survivable = vec![0u128; k as usize + 1];
        survivable[0] = 1;
        for g in &self.groups {
            let mut next = vec![0u128; k as usize + 1];
            for (j, ways) in survivable.iter().enumerate() {
                if *ways == 0 {
                    continue;
                }
                for take in 0..=g.tolerance.min(g.members) {
                    let t = j + take as usize;
                    if t <= k as usize {
                        next[t] += ways * binomial(g.members, take);
                    }
                }
            }
            survivable = next;
        }
        let total = binomial(n, k);
        Ratio::new(total - survivable[k as usize], total)
    }

    /// Sampled estimate over `trials` independent attacks.
    pub fn monte_carlo<R: Rng>(&self, k: u32, trials: u64, rng: &mut R) -> f64 {
        let n = self.targets() as usize;
        if k as usize > n {
            return 1.0;
        }
        let owner: Vec<usize> = self
            .groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| core::iter::repeat_n(i, g.members as usize))
            .collect();
        let mut pool: Vec<usize> = (0..n).collect();
        let mut hits = vec![0u32; self.groups.len()];
        let mut failures = 0u64;
        for _ in 0..trials {
            hits.iter_mut().for_each(|h| *h = 0);
            // partial Fisher-Yates: the first k entries are the victims
            for i in 0..k as usize {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
                hits[owner[pool[i]]] += 1;
            }
            if hits.iter().zip(&self.groups).any(|(h, g)| *h > g.tolerance) {
                failures += 1;
            }
        }
        failures as f64 / trials as f64
    }
}
