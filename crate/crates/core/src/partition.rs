//! Diagonal-slice leave-out sets.
//!
//! Slice `k` (1-based in the usual notation) holds the edges with
//! `(j − i) mod N = k`: exactly one outgoing and one incoming edge per node.
//! With block size `l`, slices `k, k + N_l, …, k + (l−1)N_l` are merged,
//! giving `N_l = (N−1)/l` sets. Sets are indexed from zero here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaveOutPartition {
    n_nodes: usize,
    l: usize,
    sets: Vec<Vec<(usize, usize)>>,
}

/// Set index of edge `(i, j)` in the diagonal-slice partition with block size `l`.
#[inline]
pub fn slice_index(n: usize, l: usize, i: usize, j: usize) -> usize {
    let d = (j + n - i) % n;
    debug_assert!(d != 0, "diagonal has no set");
    (d - 1) % ((n - 1) / l)
}

pub fn build_partition(n: usize, l: usize) -> Result<LeaveOutPartition> {
    if l == 0 || n < 2 || (n - 1) % l != 0 || l > n - 1 {
        return Err(Error::InvalidBlockSize { n: n.max(1), l });
    }
    let n_sets = (n - 1) / l;
    let mut sets = vec![Vec::with_capacity(n * l); n_sets];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sets[slice_index(n, l, i, j)].push((i, j));
            }
        }
    }
    Ok(LeaveOutPartition { n_nodes: n, l, sets })
}

impl LeaveOutPartition {
    /// Arbitrary (possibly invalid) sets, for checking [`validate`](Self::validate).
    pub fn from_sets(n_nodes: usize, l: usize, sets: Vec<Vec<(usize, usize)>>) -> Self {
        Self { n_nodes, l, sets }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn block_size(&self) -> usize {
        self.l
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, k: usize) -> Result<&[(usize, usize)]> {
        self.sets
            .get(k)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange { index: k, len: self.sets.len() })
    }

    pub fn sets(&self) -> &[Vec<(usize, usize)>] {
        &self.sets
    }

    /// Index of the first set containing `(i, j)`.
    pub fn membership(&self, i: usize, j: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&(i, j)))
    }

    /// Inclusion mask for leave-out sample `k`: every edge outside set `k`.
    pub fn edge_mask(&self, k: usize) -> Result<EdgeMask> {
        let mut mask = EdgeMask::full(self.n_nodes);
        for &(i, j) in self.set(k)? {
            mask.set(i, j, false);
        }
        Ok(mask)
    }

    /// Check that every edge lies in exactly one set and that each set
    /// removes exactly `l` outgoing and `l` incoming edges per node.
    pub fn validate(&self) -> ValidationReport {
        let n = self.n_nodes;
        let mut violations = Vec::new();
        let mut count = vec![0usize; n * n];
        for s in &self.sets {
            for &(i, j) in s {
                if i < n && j < n {
                    count[i * n + j] += 1;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && count[i * n + j] != 1 {
                    violations.push(Violation::EdgeCoverage {
                        sender: i,
                        receiver: j,
                        count: count[i * n + j],
                    });
                }
            }
        }
        for (k, s) in self.sets.iter().enumerate() {
            let mut out = vec![0usize; n];
            let mut inc = vec![0usize; n];
            for &(i, j) in s {
                if i == j || i >= n || j >= n {
                    violations.push(Violation::InvalidEdge { set: k, sender: i, receiver: j });
                    continue;
                }
                out[i] += 1;
                inc[j] += 1;
            }
            for v in 0..n {
                if out[v] != self.l {
                    violations.push(Violation::RowCount { set: k, node: v, removed: out[v], expected: self.l });
                }
                if inc[v] != self.l {
                    violations.push(Violation::ColumnCount { set: k, node: v, removed: inc[v], expected: self.l });
                }
            }
        }
        ValidationReport { violations }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EdgeCoverage { sender: usize, receiver: usize, count: usize },
    RowCount { set: usize, node: usize, removed: usize, expected: usize },
    ColumnCount { set: usize, node: usize, removed: usize, expected: usize },
    InvalidEdge { set: usize, sender: usize, receiver: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Per-edge 0/1 inclusion weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMask {
    n: usize,
    included: Vec<bool>,
}

impl EdgeMask {
    /// Every off-diagonal edge included.
    pub fn full(n: usize) -> Self {
        Self::from_fn(n, |_, _| true)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut included = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                included[i * n + j] = i != j && f(i, j);
            }
        }
        Self { n, included }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn included(&self, i: usize, j: usize) -> bool {
        self.included[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if i != j {
            self.included[i * self.n + j] = on;
        }
    }

    pub fn n_included(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn n_excluded(&self) -> usize {
        self.n * (self.n - 1) - self.n_included()
    }

    pub fn is_full(&self) -> bool {
        self.n_excluded() == 0
    }

    /// Drop every edge touching `node`.
    pub fn without_node(&self, node: usize) -> Self {
        let mut m = self.clone();
        for v in 0..self.n {
            m.set(node, v, false);
            m.set(v, node, false);
        }
        m
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.n, |a, b| self.included(perm[a], perm[b]))
    }
}
