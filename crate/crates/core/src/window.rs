use alloc::collections::BTreeMap;

/// Default number of slots a window spans.
pub const WINDOW_CAPACITY: u64 = 256;
/// Slots between two checkpoints.
pub const CHECKPOINT_INTERVAL: u64 = 16;

/// Sliding window of sequence-number slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window<T> {
    low: u64,
    capacity: u64,
    slots: BTreeMap<u64, T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sequence number {seq} outside window [{low}, {high})")]
pub struct OutOfWindow {
    pub seq: u64,
    pub low: u64,
    pub high: u64,
}

impl<T> Window<T> {
    pub fn new(capacity: u64) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Window {
            low: 0,
            capacity,
            slots: BTreeMap::new(),
        }
    }

    pub fn low(&self) -> u64 {
        self.low
    }

    pub fn high(&self) -> u64 {
        self.low + self.capacity
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn in_range(&self, seq: u64) -> bool {
        seq >= self.low && seq < self.high()
    }

    pub fn get(&self, seq: u64) -> Option<&T> {
        self.slots.get(&seq)
    }

    pub fn get_mut(&mut self, seq: u64) -> Option<&mut T> {
        self.slots.get_mut(&seq)
    }

    pub fn insert(&mut self, seq: u64, value: T) -> Result<Option<T>, OutOfWindow> {
        if !self.in_range(seq) {
            return Err(OutOfWindow {
                seq,
                low: self.low,
                high: self.high(),
            });
        }
        Ok(self.slots.insert(seq, value))
    }

    pub fn entry_or_insert_with(
        &mut self,
        seq: u64,
        make: impl FnOnce() -> T,
    ) -> Result<&mut T, OutOfWindow> {
        if !self.in_range(seq) {
            return Err(OutOfWindow {
                seq,
                low: self.low,
                high: self.high(),
            });
        }
        Ok(self.slots.entry(seq).or_insert_with(make))
    }

    pub fn remove(&mut self, seq: u64) -> Option<T> {
        self.slots.remove(&seq)
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (u64, &T)> {
        self.slots.iter().map(|(s, v)| (*s, v))
    }

    pub fn iter_mut(&mut self) -> impl DoubleEndedIterator<Item = (u64, &mut T)> {
        self.slots.iter_mut().map(|(s, v)| (*s, v))
    }

    pub fn max_seq(&self) -> Option<u64> {
        self.slots.keys().next_back().copied()
    }

    /// Moves the window forward and drops every slot below `new_low`.
    /// Backward shifts are ignored. Returns whether the window moved.
    pub fn shift(&mut self, new_low: u64) -> bool {
        if new_low <= self.low {
            return false;
        }
        self.slots = self.slots.split_off(&new_low);
        self.low = new_low;
        true
    }
}

/// Value-returning form of [`Window::shift`].
pub fn window_shift<T>(mut w: Window<T>, new_low: u64) -> Window<T> {
    w.shift(new_low);
    w
}

/// Largest checkpoint boundary not above `executed`.
pub fn checkpoint_floor(executed: u64) -> u64 {
    executed - executed % CHECKPOINT_INTERVAL
}
