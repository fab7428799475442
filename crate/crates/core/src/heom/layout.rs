//! Enumeration of hierarchy multi-indices with depth ≤ L and their
//! neighbor tables.

use std::collections::HashMap;

use super::HeomError;

/// Marks a missing neighbor (index outside the truncated simplex).
pub const NO_NEIGHBOR: usize = usize::MAX;

/// Multi-indices ℓ = (l_1, ..., l_K) with Σ l_p ≤ L, stored densely in order
/// of increasing depth and, within a depth, lexicographically descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyLayout {
    modes: usize,
    depth: usize,
    components: Vec<u32>,
    up: Vec<usize>,
    down: Vec<usize>,
}

/// C(n, k), saturating at usize::MAX.
pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

fn push_depth(modes: usize, remaining: usize, prefix: &mut Vec<u32>, out: &mut Vec<u32>) {
    if prefix.len() + 1 == modes {
        prefix.push(remaining as u32);
        out.extend_from_slice(prefix);
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first as u32);
        push_depth(modes, remaining - first, prefix, out);
        prefix.pop();
    }
}

impl HierarchyLayout {
    /// Layout for `modes` exponentials truncated at depth `depth`. Fails when
    /// the index count exceeds `max_ados`.
    pub fn new(modes: usize, depth: usize, max_ados: usize) -> Result<Self, HeomError> {
        if modes == 0 {
            return Err(HeomError::InvalidInput("a hierarchy needs at least one exponential".into()));
        }
        let size = binomial(depth + modes, modes);
        if size > max_ados {
            return Err(HeomError::Capacity { requested: size, budget: max_ados });
        }
        let mut components = Vec::with_capacity(size * modes);
        let mut prefix = Vec::with_capacity(modes);
        for d in 0..=depth {
            push_depth(modes, d, &mut prefix, &mut components);
        }
        debug_assert_eq!(components.len(), size * modes);

        let position: HashMap<&[u32], usize> =
            components.chunks_exact(modes).enumerate().map(|(i, c)| (c, i)).collect();
        let mut up = vec![NO_NEIGHBOR; size * modes];
        let mut down = vec![NO_NEIGHBOR; size * modes];
        let mut probe = vec![0u32; modes];
        for (i, idx) in components.chunks_exact(modes).enumerate() {
            for p in 0..modes {
                probe.copy_from_slice(idx);
                probe[p] += 1;
                if let Some(&j) = position.get(probe.as_slice()) {
                    up[i * modes + p] = j;
                }
                if idx[p] > 0 {
                    probe.copy_from_slice(idx);
                    probe[p] -= 1;
                    down[i * modes + p] = position[probe.as_slice()];
                }
            }
        }
        Ok(Self { modes, depth, components, up, down })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.components.len() / self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn multi_index(&self, i: usize) -> &[u32] {
        &self.components[i * self.modes..(i + 1) * self.modes]
    }

    pub fn index_depth(&self, i: usize) -> usize {
        self.multi_index(i).iter().map(|&c| c as usize).sum()
    }

    /// Position of ℓ + e_p, or [`NO_NEIGHBOR`].
    pub fn up(&self, i: usize, p: usize) -> usize {
        self.up[i * self.modes + p]
    }

    /// Position of ℓ − e_p, or [`NO_NEIGHBOR`].
    pub fn down(&self, i: usize, p: usize) -> usize {
        self.down[i * self.modes + p]
    }

    pub fn position(&self, idx: &[u32]) -> Option<usize> {
        if idx.len() != self.modes {
            return None;
        }
        (0..self.len()).find(|&i| self.multi_index(i) == idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_layouts() {
        let l = HierarchyLayout::new(2, 1, 100).unwrap();
        assert_eq!(l.len(), 3);
        assert_eq!(l.multi_index(0), &[0, 0]);
        assert_eq!(l.multi_index(1), &[1, 0]);
        assert_eq!(l.multi_index(2), &[0, 1]);
        assert_eq!(HierarchyLayout::new(3, 3, 100).unwrap().len(), 20);
        let flat = HierarchyLayout::new(4, 0, 100).unwrap();
        assert_eq!(flat.len(), 1);
        assert!((0..4).all(|p| flat.up(0, p) == NO_NEIGHBOR));
    }

    #[test]
    fn capacity_budget() {
        assert!(matches!(HierarchyLayout::new(12, 30, 1_000_000), Err(HeomError::Capacity { .. })));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(42, 2), 861);
        assert_eq!(binomial(400, 200), usize::MAX);
    }

    proptest! {
        #[test]
        fn stars_and_bars_and_neighbors(modes in 1usize..6, depth in 0usize..7) {
            let l = HierarchyLayout::new(modes, depth, usize::MAX).unwrap();
            prop_assert_eq!(l.len(), binomial(depth + modes, modes));
            for i in 0..l.len() {
                prop_assert!(l.index_depth(i) <= depth);
                for p in 0..modes {
                    let d = l.down(i, p);
                    if d != NO_NEIGHBOR {
                        prop_assert_eq!(l.up(d, p), i);
                    }
                    let u = l.up(i, p);
                    if u != NO_NEIGHBOR {
                        prop_assert_eq!(l.down(u, p), i);
                    } else {
                        prop_assert_eq!(l.index_depth(i), depth);
                    }
                }
            }
        }
    }
}
