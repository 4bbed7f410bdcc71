//! Ordered agent patterns `λ` and their enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patterns on more than this many agents refuse large networks by default.
pub const LARGE_PATTERN_AGENTS: usize = 4;
pub const LARGE_NETWORK_NODES: usize = 150;

/// `r` directed slots over `p` placeholder agents. An instance assigns
/// distinct nodes to the placeholders; there are `N!/(N−p)!` instances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaPattern {
    p: usize,
    edges: Vec<(usize, usize)>,
    uses_outcomes: bool,
}

impl LambdaPattern {
    pub fn new(p: usize, edges: Vec<(usize, usize)>, uses_outcomes: bool) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidPattern("pattern needs at least one edge".into()));
        }
        if p < 2 {
            return Err(Error::InvalidPattern(format!("pattern needs at least 2 agents, got {p}")));
        }
        let mut seen = vec![false; p];
        for &(a, b) in &edges {
            if a >= p || b >= p {
                return Err(Error::InvalidPattern(format!("slot ({a}, {b}) refers to a placeholder beyond p={p}")));
            }
            if a == b {
                return Err(Error::InvalidPattern(format!("self pair ({a}, {a})")));
            }
            seen[a] = true;
            seen[b] = true;
        }
        if let Some(unused) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidPattern(format!("placeholder {unused} is never referenced")));
        }
        Ok(Self { p, edges, uses_outcomes })
    }

    /// `λ = {(a, b)}`.
    pub fn single_edge(uses_outcomes: bool) -> Self {
        Self::new(2, vec![(0, 1)], uses_outcomes).expect("valid")
    }

    /// Transitive triangle `a→b, a→c, c→b`.
    pub fn transitive_triangle(uses_outcomes: bool) -> Self {
        Self::new(3, vec![(0, 1), (0, 2), (2, 1)], uses_outcomes).expect("valid")
    }

    /// Reciprocated pair `a→b, b→a`.
    pub fn reciprocal_pair(uses_outcomes: bool) -> Self {
        Self::new(2, vec![(0, 1), (1, 0)], uses_outcomes).expect("valid")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn uses_outcomes(&self) -> bool {
        self.uses_outcomes
    }

    /// `N!/(N−p)!` as a float.
    pub fn count(&self, n: usize) -> f64 {
        falling_factorial(n, self.p)
    }

    /// Node pairs of the instance with agents `agents`.
    pub fn instance_edges<'a>(&'a self, agents: &'a [usize]) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.edges.iter().map(move |&(a, b)| (agents[a], agents[b]))
    }

    pub fn check_size(&self, n: usize, allow_large: bool) -> Result<()> {
        if n < self.p {
            return Err(Error::InvalidPattern(format!("pattern needs {} agents, network has {n}", self.p)));
        }
        if self.p >= LARGE_PATTERN_AGENTS && n > LARGE_NETWORK_NODES && !allow_large {
            return Err(Error::TooLarge(format!(
                "{}-agent pattern over {n} nodes; pass allow_large to enumerate anyway",
                self.p
            )));
        }
        Ok(())
    }

    /// Visit every instance whose first placeholder is `first`.
    pub fn for_each_with_first(&self, n: usize, first: usize, f: &mut impl FnMut(&[usize])) {
        let mut agents = vec![0usize; self.p];
        let mut used = vec![false; n];
        agents[0] = first;
        used[first] = true;
        fill(1, &mut agents, &mut used, f);
    }

    /// Visit every instance.
    pub fn for_each(&self, n: usize, f: &mut impl FnMut(&[usize])) {
        for first in 0..n {
            self.for_each_with_first(n, first, f);
        }
    }
}

fn fill(slot: usize, agents: &mut [usize], used: &mut [bool], f: &mut impl FnMut(&[usize])) {
    if slot == agents.len() {
        f(agents);
        return;
    }
    for v in 0..used.len() {
        if !used[v] {
            used[v] = true;
            agents[slot] = v;
            fill(slot + 1, agents, used, f);
            used[v] = false;
        }
    }
}

/// `n (n−1) … (n−p+1)`.
pub fn falling_factorial(n: usize, p: usize) -> f64 {
    (0..p).map(|i| (n - i) as f64).product()
}
