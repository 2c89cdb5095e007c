//! Canonical upper-triangular edge indexing.
//!
//! Graphs are undirected with zero diagonal, so only the Q = K(K-1)/2 cells
//! with k1 < k2 are stored. The canonical order is row-major over the upper
//! triangle: (0,1), (0,2), ..., (0,K-1), (1,2), ..., (K-2,K-1). All node
//! indices in this crate are 0-based; file formats use 1-based labels.

/// Upper-triangular edge index set over `K` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSet {
    nodes: usize,
}

impl EdgeSet {
    pub fn new(nodes: usize) -> Self {
        assert!(nodes >= 2, "need at least two nodes");
        EdgeSet { nodes }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Number of stored edges, Q = K(K-1)/2.
    pub fn len(&self) -> usize {
        self.nodes * (self.nodes - 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of the pair (k1, k2) with k1 < k2.
    pub fn index(&self, k1: usize, k2: usize) -> usize {
        debug_assert!(k1 < k2 && k2 < self.nodes);
        // Row-major offset: rows 0..k1 contribute (K-1) + (K-2) + ...
        k1 * self.nodes - k1 * (k1 + 1) / 2 + (k2 - k1 - 1)
    }

    /// Pair (k1, k2) for a flat index; inverse of [`EdgeSet::index`].
    pub fn pair(&self, mut idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.len());
        let mut k1 = 0;
        loop {
            let row = self.nodes - k1 - 1;
            if idx < row {
                return (k1, k1 + 1 + idx);
            }
            idx -= row;
            k1 += 1;
        }
    }

    /// Iterator over pairs in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nodes).flat_map(move |k1| (k1 + 1..self.nodes).map(move |k2| (k1, k2)))
    }

    /// Edges incident to node `k` as (flat index, other node), other node
    /// ascending. There are exactly K-1 of them.
    pub fn incident(&self, k: usize) -> Vec<(usize, usize)> {
        debug_assert!(k < self.nodes);
        (0..self.nodes)
            .filter(|&j| j != k)
            .map(|j| {
                let idx = if j < k {
                    self.index(j, k)
                } else {
                    self.index(k, j)
                };
                (idx, j)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_enumeration() {
        let es = EdgeSet::new(5);
        let pairs: Vec<_> = es.pairs().collect();
        assert_eq!(pairs.len(), es.len());
        for (i, &(a, b)) in pairs.iter().enumerate() {
            assert_eq!(es.index(a, b), i);
            assert_eq!(es.pair(i), (a, b));
        }
    }

    #[test]
    fn incident_covers_node() {
        let es = EdgeSet::new(6);
        let inc = es.incident(3);
        assert_eq!(inc.len(), 5);
        for (idx, j) in inc {
            let (a, b) = es.pair(idx);
            assert!(a == 3 || b == 3);
            assert!(j == a || j == b);
            assert_ne!(j, 3);
        }
    }
}
