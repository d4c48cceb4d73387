use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distance::dot;
use crate::error::{Error, Result};
use crate::result::{ResultSet, SearchStats, TopK};

use super::{Node, NodeId, QlbTree};

/// How much of the tree a search may scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeBudget {
    /// Stop after this many leaves have been scanned.
    Leaves(usize),
    /// Stop once this many distance computations have been spent; the leaf in progress
    /// is always finished.
    DistanceComputations(usize),
}

impl ProbeBudget {
    pub fn unlimited() -> Self {
        ProbeBudget::Leaves(usize::MAX)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProbeBudget::Leaves(0) | ProbeBudget::DistanceComputations(0) => {
                Err(Error::InvalidConfig("probe budget must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn exhausted(&self, stats: &SearchStats) -> bool {
        match *self {
            ProbeBudget::Leaves(n) => stats.leaves_probed >= n as u64,
            ProbeBudget::DistanceComputations(n) => stats.distance_computations >= n as u64,
        }
    }
}

#[derive(PartialEq)]
struct Pending {
    margin: f64,
    node: NodeId,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.margin
            .total_cmp(&other.margin)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl QlbTree {
    /// Best-first search: descend to the query's home leaf, then keep expanding the
    /// unvisited subtree whose splitting hyperplane is closest to the query until the
    /// budget is spent. Leaves are scanned exhaustively.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        budget: ProbeBudget,
    ) -> Result<(ResultSet, SearchStats)> {
        crate::error::Error::check_dim(self.dim(), query.len())?;
        budget.validate()?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let start = Instant::now();
        let mut stats = SearchStats::default();
        let mut top = TopK::new(k);
        let mut frontier = BinaryHeap::new();
        frontier.push(Reverse(Pending {
            margin: 0.0,
            node: QlbTree::ROOT,
        }));

        while let Some(Reverse(Pending { node, .. })) = frontier.pop() {
            if budget.exhausted(&stats) {
                break;
            }
            let mut current = node;
            loop {
                stats.nodes_visited += 1;
                match self.nodes[current as usize] {
                    Node::Split {
                        projection,
                        threshold,
                        left,
                        right,
                    } => {
                        stats.projections += 1;
                        let alpha = dot(self.projection(projection), query);
                        let (near, far) = if alpha <= threshold {
                            (left, right)
                        } else {
                            (right, left)
                        };
                        frontier.push(Reverse(Pending {
                            margin: (alpha - threshold).abs(),
                            node: far,
                        }));
                        current = near;
                    }
                    Node::Leaf { start, end, .. } => {
                        stats.leaves_probed += 1;
                        self.points
                            .scan_into(start as usize..end as usize, query, &mut top, &mut stats);
                        break;
                    }
                }
            }
        }
        stats.wall_time = start.elapsed();
        Ok((top.into_result(), stats))
    }

    /// The leaf a vector routes to, following `v . x <= tau` to the left.
    pub fn home_leaf(&self, x: &[f32]) -> Result<NodeId> {
        crate::error::Error::check_dim(self.dim(), x.len())?;
        let mut current = QlbTree::ROOT;
        while let Node::Split {
            projection,
            threshold,
            left,
            right,
        } = self.nodes[current as usize]
        {
            current = if dot(self.projection(projection), x) <= threshold {
                left
            } else {
                right
            };
        }
        Ok(current)
    }
}
