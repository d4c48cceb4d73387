//! Search results, top-k selection and per-query cost accounting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::AddAssign;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::types::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: EntityId,
    pub distance: f64,
}

impl Neighbor {
    /// Total order used everywhere: distance, then id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

/// Up to `k` neighbors, ascending by distance with ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    neighbors: Vec<Neighbor>,
    k: usize,
}

impl ResultSet {
    pub fn empty(k: usize) -> Self {
        ResultSet {
            neighbors: Vec::new(),
            k,
        }
    }

    /// Builds a result set from arbitrary, duplicate-free neighbors.
    pub fn from_neighbors(mut neighbors: Vec<Neighbor>, k: usize) -> Self {
        neighbors.sort_by(Neighbor::rank_cmp);
        neighbors.truncate(k);
        ResultSet { neighbors, k }
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn ids(&self) -> Vec<EntityId> {
        self.neighbors.iter().map(|n| n.id).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.neighbors.iter().any(|n| n.id == id)
    }
}

/// Fuses partial result sets into the global top `k`.
///
/// An id present in several partials keeps its smallest distance.
pub fn merge_top_k(partials: &[ResultSet], k: usize) -> ResultSet {
    let mut all: Vec<Neighbor> = partials
        .iter()
        .flat_map(|p| p.neighbors.iter().copied())
        .collect();
    all.sort_by(|a, b| a.id.cmp(&b.id).then(a.distance.total_cmp(&b.distance)));
    all.dedup_by_key(|n| n.id);
    ResultSet::from_neighbors(all, k)
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    sq: f64,
    id: EntityId,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq.total_cmp(&other.sq).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded collector keeping the `k` best `(squared distance, id)` pairs.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, id: EntityId, sq: f64) {
        let c = Candidate { sq, id };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    /// Squared distance a candidate must not exceed to enter, once full.
    pub(crate) fn worst(&self) -> Option<f64> {
        (self.heap.len() == self.k).then(|| self.heap.peek().map(|c| c.sq)).flatten()
    }

    pub(crate) fn into_result(self) -> ResultSet {
        let k = self.k;
        let mut v = self.heap.into_sorted_vec();
        let neighbors = v
            .drain(..)
            .map(|c| Neighbor {
                id: c.id,
                distance: c.sq.sqrt(),
            })
            .collect();
        ResultSet { neighbors, k }
    }
}

/// Deterministic work counters for one search, plus wall time.
///
/// `distance_computations` counts full-vector distance (or ADC) evaluations against
/// candidates. `projections` counts inner products against split hyperplanes or hash
/// vectors, which cost the same as a distance but do not produce candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub distance_computations: u64,
    pub nodes_visited: u64,
    pub leaves_probed: u64,
    pub projections: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SearchStats {
    /// Distance computations plus projections: the vector-operation latency proxy.
    pub fn vector_ops(&self) -> u64 {
        self.distance_computations + self.projections
    }

    /// Counters only; wall time is excluded so the comparison is deterministic.
    pub fn same_counts(&self, other: &Self) -> bool {
        self.distance_computations == other.distance_computations
            && self.nodes_visited == other.nodes_visited
            && self.leaves_probed == other.leaves_probed
            && self.projections == other.projections
    }
}

impl AddAssign for SearchStats {
    fn add_assign(&mut self, rhs: Self) {
        self.distance_computations += rhs.distance_computations;
        self.nodes_visited += rhs.nodes_visited;
        self.leaves_probed += rhs.leaves_probed;
        self.projections += rhs.projections;
        self.wall_time += rhs.wall_time;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rs(items: &[(EntityId, f64)], k: usize) -> ResultSet {
        ResultSet::from_neighbors(
            items
                .iter()
                .map(|&(id, distance)| Neighbor { id, distance })
                .collect(),
            k,
        )
    }

    fn pairs(r: &ResultSet) -> Vec<(EntityId, f64)> {
        r.neighbors().iter().map(|n| (n.id, n.distance)).collect()
    }

    #[test]
    fn merge_examples() {
        assert_eq!(pairs(&merge_top_k(&[rs(&[(1, 0.5)], 10)], 10)), vec![(1, 0.5)]);
        let merged = merge_top_k(&[rs(&[(1, 0.3), (2, 0.9)], 10), rs(&[(3, 0.5)], 10)], 2);
        assert_eq!(pairs(&merged), vec![(1, 0.3), (3, 0.5)]);
        let merged = merge_top_k(&[rs(&[(7, 0.4)], 10), rs(&[(7, 0.2)], 10)], 1);
        assert_eq!(pairs(&merged), vec![(7, 0.2)]);
        assert!(merge_top_k(&[], 3).is_empty());
    }

    #[test]
    fn ties_break_by_id() {
        let r = rs(&[(9, 1.0), (2, 1.0), (5, 0.5)], 3);
        assert_eq!(r.ids(), vec![5, 2, 9]);
    }

    #[test]
    fn topk_matches_sort() {
        let mut t = TopK::new(3);
        for (id, sq) in [(4, 9.0), (1, 1.0), (3, 4.0), (2, 4.0), (0, 16.0)] {
            t.push(id, sq);
        }
        assert_eq!(pairs(&t.into_result()), vec![(1, 1.0), (2, 2.0), (3, 2.0)]);
    }

    proptest! {
        #[test]
        fn merge_equals_brute_sort(
            parts in proptest::collection::vec(
                proptest::collection::btree_map(0u32..30, 0u8..20, 0..8), 0..5),
            k in 1usize..12,
        ) {
            let partials: Vec<ResultSet> = parts
                .iter()
                .map(|m| rs(&m.iter().map(|(&id, &d)| (id, d as f64 / 4.0)).collect::<Vec<_>>(), 100))
                .collect();
            let merged = merge_top_k(&partials, k);

            let mut best: std::collections::BTreeMap<EntityId, f64> = Default::default();
            for m in &parts {
                for (&id, &d) in m {
                    let d = d as f64 / 4.0;
                    let e = best.entry(id).or_insert(d);
                    if d < *e { *e = d; }
                }
            }
            let mut oracle: Vec<(EntityId, f64)> = best.into_iter().collect();
            oracle.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            oracle.truncate(k);
            prop_assert_eq!(pairs(&merged), oracle);
            prop_assert_eq!(merged, merge_top_k(&partials, k));
        }
    }
}
