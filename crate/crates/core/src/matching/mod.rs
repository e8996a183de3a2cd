//! Minimum-weight perfect matching over a table of pairwise and boundary distances.

pub mod blossom;

use crate::error::{Error, Result};
use crate::num::Real;

/// Symmetric pair weights between `n` flagged nodes, plus optional weights for
/// matching a node to the boundary. `None` marks a missing edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable<T> {
    n: usize,
    pair: Vec<Option<T>>,
    boundary: Option<Vec<Option<T>>>,
}

impl<T: Real> DistanceTable<T> {
    /// Table without a boundary; every node must be paired with another node.
    pub fn new(n: usize) -> Self {
        Self { n, pair: vec![None; n * n], boundary: None }
    }

    /// Table where nodes may also be matched to the boundary.
    pub fn with_boundary(n: usize) -> Self {
        Self { n, pair: vec![None; n * n], boundary: Some(vec![None; n]) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary.is_some()
    }

    pub fn set_pair(&mut self, i: usize, j: usize, w: Option<T>) {
        assert!(i != j, "self-pair {i}");
        self.pair[i * self.n + j] = w;
        self.pair[j * self.n + i] = w;
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<T> {
        self.pair[i * self.n + j]
    }

    /// Panics if the table was built without a boundary.
    pub fn set_boundary(&mut self, i: usize, w: Option<T>) {
        self.boundary.as_mut().expect("table has no boundary")[i] = w;
    }

    pub fn boundary(&self, i: usize) -> Option<T> {
        self.boundary.as_ref().and_then(|b| b[i])
    }

    /// Total weight of a matching, or `None` if it uses a missing edge.
    pub fn weight_of(&self, mates: &[Mate]) -> Option<T> {
        let mut total = T::zero();
        for (i, m) in mates.iter().enumerate() {
            match *m {
                Mate::Node(j) if i < j => total += self.pair(i, j)?,
                Mate::Node(_) => {}
                Mate::Boundary => total += self.boundary(i)?,
            }
        }
        Some(total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mate {
    Node(usize),
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matching<T> {
    pub mates: Vec<Mate>,
    pub weight: T,
}

impl<T: Real> Matching<T> {
    /// Node pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mates
            .iter()
            .enumerate()
            .filter_map(|(i, m)| match *m {
                Mate::Node(j) if i < j => Some((i, j)),
                _ => None,
            })
            .collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.mates.len()).filter(|&i| self.mates[i] == Mate::Boundary).collect()
    }
}

/// Minimum-weight perfect matching of the table.
///
/// With a boundary, each node gets a twin joined to it at its boundary weight,
/// and twins are joined to each other at zero cost, so any subset of nodes can
/// end on the boundary.
pub fn mwpm<T: Real>(table: &DistanceTable<T>) -> Result<Matching<T>> {
    let n = table.len();
    if n == 0 {
        return Ok(Matching { mates: Vec::new(), weight: T::zero() });
    }
    let mut edges: Vec<(usize, usize, T)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some(w) = table.pair(i, j) {
                edges.push((i, j, w));
            }
        }
    }
    let total_nodes = if table.has_boundary() {
        for i in 0..n {
            if let Some(w) = table.boundary(i) {
                edges.push((i, n + i, w));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                edges.push((n + i, n + j, T::zero()));
            }
        }
        2 * n
    } else {
        if n % 2 == 1 {
            return Err(Error::OddNodeCount(n));
        }
        n
    };

    // Every perfect matching has the same number of edges, so maximising
    // C - w under maximum cardinality minimises the total weight.
    let max = edges.iter().fold(T::zero(), |m, e| m.max(e.2));
    let c = max + T::one();
    let flipped: Vec<(usize, usize, T)> = edges.iter().map(|&(i, j, w)| (i, j, c - w)).collect();
    let raw = blossom::max_weight_matching(total_nodes, &flipped, true);

    let mut mates = Vec::with_capacity(n);
    for (i, m) in raw.iter().take(n).enumerate() {
        match *m {
            Some(j) if j < n => mates.push(Mate::Node(j)),
            Some(j) if j == n + i => mates.push(Mate::Boundary),
            _ => return Err(Error::NoPerfectMatching),
        }
    }
    let weight = table.weight_of(&mates).ok_or(Error::NoPerfectMatching)?;
    Ok(Matching { mates, weight })
}
