use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One stored transition `(s, a, r, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

impl Experience {
    pub fn new(
        state: Vec<f64>,
        action: Vec<f64>,
        reward: f64,
        next_state: Vec<f64>,
    ) -> Result<Self> {
        if state.len() != next_state.len() {
            return Err(Error::InvalidShape(format!(
                "state has {} entries but next state has {}",
                state.len(),
                next_state.len()
            )));
        }
        if !reward.is_finite() {
            return Err(Error::NumericOverflow(format!(
                "non-finite reward {reward}"
            )));
        }
        Ok(Experience {
            state,
            action,
            reward,
            next_state,
        })
    }
}

/// Bounded FIFO of experiences; pushing into a full memory drops the oldest.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Experience>,
    rng: ChaCha8Rng,
}

impl ReplayMemory {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter(
                "replay capacity must be >= 1".into(),
            ));
        }
        Ok(ReplayMemory {
            capacity,
            // Large memories fill gradually; don't reserve them up front.
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buffer.iter()
    }

    pub fn push(&mut self, e: Experience) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(e);
    }

    /// Drops every stored experience.
    pub fn clear(&mut self) {
        self.buffer.clear();
    }

    /// Draws `m` experiences uniformly with replacement.
    pub fn sample(&mut self, m: usize) -> Result<Vec<&Experience>> {
        if m == 0 || self.buffer.len() < m {
            return Err(Error::InsufficientData {
                needed: m.max(1),
                available: self.buffer.len(),
            });
        }
        let n = self.buffer.len();
        let idx: Vec<usize> = (0..m).map(|_| self.rng.random_range(0..n)).collect();
        Ok(idx.into_iter().map(|i| &self.buffer[i]).collect())
    }
}
