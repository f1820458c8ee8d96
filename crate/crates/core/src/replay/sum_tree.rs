use alloc::vec;
use alloc::vec::Vec;

/// Complete binary tree of non-negative values whose internal nodes hold the
/// sum of their children.
///
/// Node `1` is the root and leaves live at `capacity..2 * capacity`. Every
/// update recomputes the path to the root from the children, so internal
/// nodes are always exactly `left + right`.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// `leaves` is rounded up to a power of two.
    pub fn new(leaves: usize) -> Self {
        let capacity = leaves.max(1).next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    pub fn set(&mut self, leaf: usize, value: f64) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        assert!(value >= 0.0 && value.is_finite(), "invalid priority {value}");
        let mut i = self.capacity + leaf;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`.
    ///
    /// Masses at or beyond the total land on the last non-empty leaf, and a
    /// subtree with zero mass is never entered, so the result always has a
    /// positive value when the total is positive.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut i = 1;
        while i < self.capacity {
            let left = 2 * i;
            if (mass < self.nodes[left] && self.nodes[left] > 0.0) || self.nodes[left + 1] <= 0.0 {
                i = left;
            } else {
                mass -= self.nodes[left];
                i = left + 1;
            }
        }
        i - self.capacity
    }

    /// Checks that every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.capacity).all(|i| self.nodes[i] == self.nodes[2 * i] + self.nodes[2 * i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pairwise sum in the same association order as the tree.
    fn tree_order_sum(leaves: &[f64]) -> f64 {
        if leaves.len() == 1 {
            leaves[0]
        } else {
            let (l, r) = leaves.split_at(leaves.len() / 2);
            tree_order_sum(l) + tree_order_sum(r)
        }
    }

    fn linear_find(leaves: &[f64], mass: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in leaves.iter().enumerate() {
            if p > 0.0 {
                last = i;
                if mass < acc + p {
                    return i;
                }
            }
            acc += p;
        }
        last
    }

    #[test]
    fn rounds_capacity_up() {
        assert_eq!(SumTree::new(5).capacity(), 8);
        assert_eq!(SumTree::new(8).capacity(), 8);
    }

    #[test]
    fn root_is_sum_after_update() {
        let mut t = SumTree::new(4);
        for (i, p) in [1.0, 3.0, 0.5, 2.0].into_iter().enumerate() {
            t.set(i, p);
        }
        assert_eq!(t.total(), 6.5);
        t.set(1, 0.25);
        assert_eq!(t.total(), 3.75);
        assert!(t.is_consistent());
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(1.1), 1);
        assert_eq!(t.find(1.3), 2);
        assert_eq!(t.find(100.0), 3);
    }

    #[test]
    fn zero_mass_leaves_are_never_found() {
        let mut t = SumTree::new(4);
        t.set(1, 2.0);
        for m in [0.0, 1.0, 1.999, 2.0, 5.0] {
            assert_eq!(t.find(m), 1);
        }
    }

    proptest! {
        #[test]
        fn matches_flat_array(ops in proptest::collection::vec((0usize..13, 0.0f64..10.0, 0.0f64..1.0), 1..200)) {
            let mut tree = SumTree::new(13);
            let mut flat = vec![0.0; tree.capacity()];
            for (leaf, p, u) in ops {
                tree.set(leaf, p);
                flat[leaf] = p;
                prop_assert!(tree.is_consistent());
                prop_assert_eq!(tree.total(), tree_order_sum(&flat));
                if tree.total() > 0.0 {
                    let mass = u * tree.total();
                    let got = tree.find(mass);
                    let want = linear_find(&flat, mass);
                    if got != want {
                        // Only acceptable at a rounding boundary.
                        let boundary: f64 = flat[..got.max(want)].iter().sum();
                        prop_assert!((boundary - mass).abs() < 1e-9 * tree.total().max(1.0));
                    }
                    prop_assert!(flat[got] > 0.0);
                }
            }
        }
    }
}
