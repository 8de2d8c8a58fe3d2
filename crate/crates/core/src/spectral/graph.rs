use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hash;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Hashed state dictionary plus a symmetric weighted adjacency.
///
/// Keys are interned in first-seen order; edge weights are kept symmetric and
/// degrees are updated with every edge change.
#[derive(Debug, Clone)]
pub struct GraphAccumulator<K: Hash + Eq> {
    index_of: IndexSet<K>,
    adjacency: Vec<BTreeMap<usize, f64>>,
    degrees: Vec<f64>,
}

impl<K: Hash + Eq> Default for GraphAccumulator<K> {
    fn default() -> Self {
        Self { index_of: IndexSet::new(), adjacency: Vec::new(), degrees: Vec::new() }
    }
}

impl<K: Hash + Eq> PartialEq for GraphAccumulator<K> {
    fn eq(&self, other: &Self) -> bool {
        self.index_of == other.index_of && self.adjacency == other.adjacency && self.degrees == other.degrees
    }
}

impl<K: Hash + Eq> GraphAccumulator<K> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense index of `key`, inserting it if new.
    pub fn intern(&mut self, key: K) -> usize {
        let (idx, inserted) = self.index_of.insert_full(key);
        if inserted {
            self.adjacency.push(BTreeMap::new());
            self.degrees.push(0.0);
        }
        idx
    }

    /// Records that the agent moved between two states: a unit-weight undirected
    /// edge. Repeats are idempotent and self-transitions only intern the key.
    pub fn accumulate_transition(&mut self, from: K, to: K) {
        let i = self.intern(from);
        let j = self.intern(to);
        if i != j {
            self.set_weight(i, j, 1.0);
        }
    }

    /// Sets `W_ij = W_ji = w` (self-edges allowed) and keeps degrees consistent.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        assert!(w >= 0.0 && w.is_finite(), "edge weights must be finite and nonnegative");
        let old = self.adjacency[i].get(&j).copied().unwrap_or(0.0);
        if w == 0.0 {
            self.adjacency[i].remove(&j);
            self.adjacency[j].remove(&i);
        } else {
            self.adjacency[i].insert(j, w);
            self.adjacency[j].insert(i, w);
        }
        self.degrees[i] += w - old;
        if i != j {
            self.degrees[j] += w - old;
        }
    }

    pub fn key_index(&self, key: &K) -> Option<usize> {
        self.index_of.get_index_of(key)
    }

    pub fn key(&self, i: usize) -> &K {
        &self.index_of[i]
    }

    pub fn n_vertices(&self) -> usize {
        self.index_of.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i].get(&j).copied().unwrap_or(0.0)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[i].iter().map(|(&j, &w)| (j, w))
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Undirected edges `(i, j, w)` with `i ≤ j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for (&j, &w) in row.range(i..) {
                out.push((i, j, w));
            }
        }
        out
    }

    /// Number of undirected edges, self-edges excluded.
    pub fn edge_count(&self) -> usize {
        self.edges().iter().filter(|(i, j, _)| i != j).count()
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        let n = self.n_vertices();
        let mut w = Matrix::zeros(n, n);
        for (i, row) in self.adjacency.iter().enumerate() {
            for (&j, &x) in row {
                w[(i, j)] = x;
            }
        }
        w
    }

    /// Connected components as a vertex → component label map.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_vertices();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for root in 0..n {
            if label[root] != usize::MAX {
                continue;
            }
            let mut stack = vec![root];
            label[root] = next;
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Edge list as CSV: `i,j,weight` with a header row.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        for (i, j, w) in self.edges() {
            let _ = writeln!(out, "{i},{j},{w:.16e}");
        }
        out
    }
}

impl GraphAccumulator<usize> {
    /// Graph over vertices `0..n` (keys are the indices themselves).
    pub fn with_vertices(n: usize) -> Self {
        let mut acc = Self::new();
        for i in 0..n {
            acc.intern(i);
        }
        acc
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut acc = Self::with_vertices(n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("edge ({i}, {j}) outside {n} vertices")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("edge weight {w}")));
            }
            acc.set_weight(i, j, w);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_transition_is_idempotent() {
        let mut a = GraphAccumulator::new();
        a.accumulate_transition("x", "y");
        let once = a.clone();
        a.accumulate_transition("x", "y");
        assert_eq!(a, once);
    }

    #[test]
    fn reverse_transition_shares_the_edge() {
        let mut a = GraphAccumulator::new();
        a.accumulate_transition(1u32, 2u32);
        a.accumulate_transition(2u32, 1u32);
        assert_eq!(a.n_vertices(), 2);
        assert_eq!(a.edges(), vec![(0, 1, 1.0)]);
        assert_eq!(a.degrees(), &[1.0, 1.0]);
    }

    #[test]
    fn self_transition_only_interns() {
        let mut a = GraphAccumulator::new();
        a.accumulate_transition('s', 's');
        assert_eq!(a.n_vertices(), 1);
        assert_eq!(a.edge_count(), 0);
    }

    #[test]
    fn degrees_follow_weight_changes() {
        let mut a = GraphAccumulator::with_vertices(3);
        a.set_weight(0, 1, 2.0);
        a.set_weight(1, 2, 0.5);
        a.set_weight(0, 1, 1.0);
        a.set_weight(2, 2, 3.0);
        assert_eq!(a.degrees(), &[1.0, 1.5, 3.5]);
        assert_eq!(a.components(), vec![0, 0, 0]);
    }
}
