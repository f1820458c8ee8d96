use alloc::vec::Vec;

use rand::Rng;

use super::SumTree;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerConfig {
    pub capacity: usize,
    /// Priority exponent; 0 gives uniform sampling.
    pub alpha: f64,
    /// Floor added to `|td_error|` so every item stays sampleable.
    pub priority_epsilon: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            capacity: 50_000,
            alpha: 0.6,
            priority_epsilon: 1e-6,
        }
    }
}

/// A sampled slot and its normalized importance weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled {
    pub index: usize,
    pub weight: f64,
}

/// Proportional prioritized replay over a ring buffer.
#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    config: PerConfig,
    items: Vec<T>,
    priorities: Vec<f64>,
    next: usize,
    tree: SumTree,
    max_priority: f64,
}

impl<T> PrioritizedReplay<T> {
    pub fn new(config: PerConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        if !(config.alpha >= 0.0) || !(config.priority_epsilon > 0.0) {
            return Err(Error::Config("replay needs alpha >= 0 and priority epsilon > 0".into()));
        }
        Ok(Self {
            config,
            items: Vec::new(),
            priorities: Vec::new(),
            next: 0,
            tree: SumTree::new(config.capacity),
            max_priority: 1.0,
        })
    }

    pub fn config(&self) -> &PerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> &T {
        &self.items[index]
    }

    /// Raw priority (`|td_error| + epsilon`, before the exponent).
    pub fn priority(&self, index: usize) -> f64 {
        self.priorities[index]
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Inserts with the largest priority seen so far, overwriting the oldest
    /// item once full. Returns the slot.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        if self.items.len() < self.config.capacity {
            self.items.push(item);
            self.priorities.push(self.max_priority);
        } else {
            self.items[slot] = item;
            self.priorities[slot] = self.max_priority;
        }
        self.tree.set(slot, self.scaled(self.max_priority));
        self.next = (self.next + 1) % self.config.capacity;
        slot
    }

    fn scaled(&self, p: f64) -> f64 {
        if self.config.alpha == 0.0 {
            1.0
        } else {
            libm::pow(p, self.config.alpha)
        }
    }

    /// Sampling probability of a slot.
    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    /// Stratified proportional sampling.
    ///
    /// The total mass is split into `batch` equal segments and one point is
    /// drawn uniformly in each. Weights are `(N P(i))^-beta` divided by the
    /// batch maximum.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Vec<Sampled>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::Config(alloc::format!(
                "cannot sample {batch} items from a buffer of {}",
                self.items.len()
            )));
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let n = self.items.len() as f64;
        let mut out = Vec::with_capacity(batch);
        let mut max_w: f64 = 0.0;
        for j in 0..batch {
            let mass = (j as f64 + rng.gen::<f64>()) * segment;
            let index = self.tree.find(mass.min(total));
            let p = self.tree.get(index) / total;
            let weight = libm::pow(n * p, -beta);
            max_w = max_w.max(weight);
            out.push(Sampled { index, weight });
        }
        for s in &mut out {
            s.weight /= max_w;
        }
        Ok(out)
    }

    /// Sets `priority = |td_error| + epsilon` for each sampled slot.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::Dimension {
                context: "priority update",
                expected: indices.len(),
                got: td_errors.len(),
            });
        }
        for (&i, &d) in indices.iter().zip(td_errors) {
            if i >= self.items.len() {
                return Err(Error::Internal(alloc::format!("priority index {i} out of range")));
            }
            if !d.is_finite() {
                return Err(Error::fault("replay", "non-finite td error"));
            }
            let p = libm::fabs(d) + self.config.priority_epsilon;
            self.priorities[i] = p;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, self.scaled(p));
        }
        Ok(())
    }
}
