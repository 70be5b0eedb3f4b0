use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f32>,
    /// Relaxed (or one-hot) action fed to the critic.
    pub a: [f32; 2],
    pub a_logits: [f32; 2],
    pub r: f32,
    pub r_hat: f32,
    pub s_next: Vec<f32>,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.s
            .iter()
            .chain(&self.s_next)
            .chain(&self.a)
            .chain(&self.a_logits)
            .chain([&self.r, &self.r_hat])
            .all(|v| v.is_finite())
    }
}

/// Fixed-capacity ring buffer; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer needs a positive capacity");
        Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
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

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition"));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Contents from oldest to newest.
    pub fn iter_chronological(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// `batch` distinct transitions chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Result<Vec<&Transition>> {
        if batch > self.storage.len() {
            return Err(Error::InsufficientHistory {
                have: self.storage.len(),
                need: batch,
            });
        }
        Ok(sample(rng, self.storage.len(), batch)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}
