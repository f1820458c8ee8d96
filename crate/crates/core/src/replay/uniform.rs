use alloc::vec::Vec;

use rand::Rng;

/// Fixed-capacity ring buffer sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct UniformReplay<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> UniformReplay<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
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

    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    /// `None` when fewer than `batch` items are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some((0..batch).map(|_| rng.gen_range(0..self.items.len())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = UniformReplay::new(3);
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        let mut v: Vec<_> = (0..3).map(|i| *b.get(i)).collect();
        v.sort();
        assert_eq!(v, [2, 3, 4]);
        let mut rng = seeded(0, 0);
        assert!(b.sample(4, &mut rng).is_none());
        assert_eq!(b.sample(3, &mut rng).unwrap().len(), 3);
    }
}
