use rand::Rng;

use crate::error::{Error, Result};

/// Fixed-capacity FIFO ring of transitions (or anything else).
///
/// Single writer; readers only between write phases.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    storage: Vec<T>,
    write_cursor: usize,
}

impl<T> ReplayBuffer<T> {
    /// Storage grows lazily, so a large nominal capacity costs nothing up front.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            storage: Vec::new(),
            write_cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends `item`, overwriting the oldest entry once full.
    pub fn insert(&mut self, item: T) {
        if self.storage.len() < self.capacity {
            self.storage.push(item);
        } else {
            self.storage[self.write_cursor] = item;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = T>) {
        for item in items {
            self.insert(item);
        }
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_cursor
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// Raw slot access; slot order is not insertion order once wrapped.
    pub fn slot(&self, i: usize) -> &T {
        &self.storage[i]
    }

    /// `n` uniform slot indices drawn with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::Precondition("cannot sample from an empty replay buffer".into()));
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..len)).collect())
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&T>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}
