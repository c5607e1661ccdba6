//! Threshold aggregation over inputs from several replicas.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// Per-reporter numeric opinions. A reporter's opinion only ever grows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpinionSet<K: Ord, V: Ord + Copy> {
    opinions: BTreeMap<K, V>,
}

impl<K: Ord, V: Ord + Copy> Default for OpinionSet<K, V> {
    fn default() -> Self {
        OpinionSet {
            opinions: BTreeMap::new(),
        }
    }
}

impl<K: Ord, V: Ord + Copy> OpinionSet<K, V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `value` for `reporter`, keeping the maximum. Returns whether
    /// the stored opinion changed.
    pub fn report(&mut self, reporter: K, value: V) -> bool {
        match self.opinions.get_mut(&reporter) {
            Some(old) if *old >= value => false,
            Some(old) => {
                *old = value;
                true
            }
            None => {
                self.opinions.insert(reporter, value);
                true
            }
        }
    }

    pub fn get(&self, reporter: &K) -> Option<V> {
        self.opinions.get(reporter).copied()
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &V)> {
        self.opinions.iter()
    }

    pub fn highest(&self, threshold: usize) -> Option<V> {
        highest(self.opinions.values().copied(), threshold)
    }
}

/// The `threshold`-th largest value, i.e. the largest `v` such that at least
/// `threshold` reports are `>= v`.
pub fn highest<V: Ord + Copy>(values: impl IntoIterator<Item = V>, threshold: usize) -> Option<V> {
    assert!(threshold >= 1, "threshold must be positive");
    let mut vals: Vec<V> = values.into_iter().collect();
    if vals.len() < threshold {
        return None;
    }
    vals.sort_unstable_by(|a, b| b.cmp(a));
    Some(vals[threshold - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QuorumError {
    #[error("two distinct values reached the acceptance threshold")]
    AmbiguousQuorum,
}

/// Returns the value reported identically by at least `threshold` senders.
pub fn quorum_match<'a, K: 'a, V: Ord + Clone + 'a>(
    inputs: impl IntoIterator<Item = (&'a K, &'a V)>,
    threshold: usize,
) -> Result<Option<V>, QuorumError> {
    assert!(threshold >= 1, "threshold must be positive");
    let mut counts: BTreeMap<&V, usize> = BTreeMap::new();
    for (_, v) in inputs {
        *counts.entry(v).or_default() += 1;
    }
    let mut winners = counts.into_iter().filter(|(_, n)| *n >= threshold);
    match (winners.next(), winners.next()) {
        (None, _) => Ok(None),
        (Some((v, _)), None) => Ok(Some(v.clone())),
        (Some(_), Some(_)) => Err(QuorumError::AmbiguousQuorum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(char, u32)]) -> OpinionSet<char, u32> {
        let mut s = OpinionSet::new();
        for (k, v) in pairs {
            s.report(*k, *v);
        }
        s
    }

    #[test]
    fn highest_examples() {
        assert_eq!(set(&[('a', 5), ('b', 3), ('c', 5)]).highest(2), Some(5));
        assert_eq!(set(&[('a', 7)]).highest(2), None);
        assert_eq!(set(&[('a', 4), ('b', 4), ('c', 4)]).highest(3), Some(4));
    }

    #[test]
    fn opinions_never_regress() {
        let mut s = set(&[('a', 5)]);
        assert!(!s.report('a', 3));
        assert_eq!(s.get(&'a'), Some(5));
        assert!(s.report('a', 6));
    }

    #[test]
    fn quorum_match_examples() {
        let m: BTreeMap<char, &str> = [('a', "x"), ('b', "x"), ('c', "y")].into();
        assert_eq!(quorum_match(&m, 2), Ok(Some("x")));
        let m: BTreeMap<char, &str> = [('a', "x"), ('b', "y")].into();
        assert_eq!(quorum_match(&m, 2), Ok(None));
        let m: BTreeMap<char, &str> = [('a', "x"), ('b', "x"), ('c', "y"), ('d', "y")].into();
        assert_eq!(quorum_match(&m, 2), Err(QuorumError::AmbiguousQuorum));
    }

    /// Brute force: max over all `t`-subsets of the subset minimum.
    fn brute_highest(vals: &[u32], t: usize) -> Option<u32> {
        let n = vals.len();
        let mut best = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != t {
                continue;
            }
            let min = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| vals[i]).min();
            best = best.max(min);
        }
        best
    }

    #[test]
    fn highest_matches_brute_force_exhaustively() {
        // every opinion vector of up to 5 reporters over 0..=4
        for n in 0..=5usize {
            let total = 5usize.pow(n as u32);
            for code in 0..total {
                let mut c = code;
                let vals: Vec<u32> = (0..n)
                    .map(|_| {
                        let v = (c % 5) as u32;
                        c /= 5;
                        v
                    })
                    .collect();
                for t in 1..=5 {
                    assert_eq!(highest(vals.iter().copied(), t), brute_highest(&vals, t));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn highest_is_permutation_invariant(
            mut vals in proptest::collection::vec(0u32..5, 0..6),
            t in 1usize..6,
            seed in any::<u64>(),
        ) {
            let h = highest(vals.iter().copied(), t);
            // deterministic shuffle
            let mut s = seed;
            for i in (1..vals.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                vals.swap(i, j);
            }
            prop_assert_eq!(highest(vals.iter().copied(), t), h);
        }

        #[test]
        fn quorum_match_consistent_on_supersets(
            base in proptest::collection::btree_map(0u8..8, 0u8..3, 0..8),
            extra in proptest::collection::btree_map(8u8..12, 0u8..3, 0..4),
            t in 1usize..5,
        ) {
            let mut sup = base.clone();
            sup.extend(extra);
            let small = quorum_match(&base, t);
            let big = quorum_match(&sup, t);
            if let (Ok(Some(a)), Ok(Some(b))) = (small, big) {
                prop_assert_eq!(a, b);
            }
            // a value decided on the subset never disappears on the superset
            if let Ok(Some(_)) = small {
                prop_assert!(big != Ok(None));
            }
        }
    }
}
