use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::Millis;

/// Machines on `side` cannot talk to the others while the partition lasts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub from: Millis,
    pub until: Millis,
    pub side: BTreeSet<u16>,
}

impl Partition {
    pub fn separates(&self, now: Millis, a: Option<u16>, b: Option<u16>) -> bool {
        if now < self.from || now >= self.until {
            return false;
        }
        let inside = |m: Option<u16>| m.is_some_and(|m| self.side.contains(&m));
        inside(a) != inside(b)
    }
}

/// Partially synchronous network. Before `gst` messages may be dropped and
/// delayed by up to `reorder_window` extra; afterwards every message arrives
/// within `max_delay`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub min_delay: Millis,
    pub max_delay: Millis,
    /// Drop probability before `gst`, in parts per million.
    pub drop_ppm: u32,
    pub reorder_window: Millis,
    pub partitions: Vec<Partition>,
    pub gst: Millis,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            min_delay: 1,
            max_delay: 5,
            drop_ppm: 0,
            reorder_window: 0,
            partitions: Vec::new(),
            gst: 0,
        }
    }
}

impl NetworkModel {
    pub fn synchronous() -> Self {
        Self::default()
    }

    /// Delivery delay for a message sent at `now`, or `None` if it is lost.
    pub fn transit<R: Rng>(&self, now: Millis, from: Option<u16>, to: Option<u16>, rng: &mut R) -> Option<Millis> {
        if self.partitions.iter().any(|p| p.separates(now, from, to)) {
            return None;
        }
        let mut delay = rng.random_range(self.min_delay..=self.max_delay.max(self.min_delay));
        if now < self.gst {
            if self.drop_ppm > 0 && rng.random_range(0..1_000_000) < self.drop_ppm {
                return None;
            }
            if self.reorder_window > 0 {
                delay += rng.random_range(0..=self.reorder_window);
            }
        }
        Some(delay)
    }

    /// Last instant at which the network may still misbehave.
    pub fn stable_from(&self) -> Millis {
        self.partitions.iter().map(|p| p.until).fold(self.gst, Millis::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partitions_cut_both_directions() {
        let p = Partition {
            from: 10,
            until: 20,
            side: [3].into_iter().collect(),
        };
        assert!(p.separates(10, Some(3), Some(1)));
        assert!(p.separates(19, Some(1), Some(3)));
        assert!(!p.separates(20, Some(1), Some(3)));
        assert!(!p.separates(15, Some(1), Some(2)));
        assert!(p.separates(15, None, Some(3)));
    }

    #[test]
    fn no_loss_after_gst() {
        let net = NetworkModel {
            drop_ppm: 1_000_000,
            reorder_window: 50,
            gst: 100,
            ..NetworkModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(net.transit(99, Some(0), Some(1), &mut rng), None);
        for _ in 0..100 {
            let d = net.transit(100, Some(0), Some(1), &mut rng).unwrap();
            assert!((1..=5).contains(&d));
        }
    }
}
