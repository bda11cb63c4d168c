//! Fixed-capacity FIFO experience buffer. Each transition carries the
//! Bernoulli head mask drawn when it was stored.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    /// Clipped reward in `[-1, 1]`.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// One bit per head: does head k learn from this transition?
    pub mask: Vec<bool>,
}

impl Transition {
    /// Checks the transition against an `action_count`/`heads` contract.
    pub fn validate(&self, action_count: usize, heads: usize) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.reward) {
            return Err(Error::Validation(format!(
                "reward {} outside [-1, 1]",
                self.reward
            )));
        }
        if self.action >= action_count {
            return Err(Error::Validation(format!(
                "action {} outside [0, {action_count})",
                self.action
            )));
        }
        if self.mask.len() != heads {
            return Err(Error::Validation(format!(
                "mask has {} bits, expected {heads}",
                self.mask.len()
            )));
        }
        if self.state.len() != self.next_state.len() {
            return Err(Error::Validation("state and next state widths differ".into()));
        }
        Ok(())
    }
}

/// Draws a K-bit mask with each bit set independently with probability `p`.
pub fn sample_mask<R: Rng + ?Sized>(heads: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..heads).map(|_| rng.random::<f64>() < p).collect()
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    action_count: usize,
    heads: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, action_count: usize, heads: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            action_count,
            heads,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate(self.action_count, self.heads)?;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Contents ordered oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `batch_size` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        let n = self.items.len();
        Ok((0..batch_size).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }
}
