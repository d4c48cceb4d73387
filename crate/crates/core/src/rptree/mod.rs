//! Random-projection trees.
//!
//! [`TreeMode::Balanced`] builds the classic spatial-partitioning projection tree: at each
//! node the highest-variance of `K` random unit projections is split at its median.
//! [`TreeMode::Boosted`] builds the query-likelihood boosted tree: near the root the
//! threshold equalizes query-probability mass instead of entity counts, and the
//! projection score rewards splits that leave the two sides count-unbalanced, so
//! frequently queried entities end up in shallow, small leaves. Below `boost_depth` the
//! builder falls back to balanced splitting.
//!
//! Both share one search: a margin-ordered best-first traversal bounded by a
//! [`ProbeBudget`].

mod build;
mod search;
mod serial;
pub mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::LikelihoodProfile;
use crate::points::Points;
use crate::types::EntityId;

pub use search::ProbeBudget;
pub use split::{balanced_threshold, projection_variance, split_score, unbalance_factor, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    Balanced,
    Boosted,
}

/// How variance and count unbalance are put on a common scale before blending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScaling {
    /// Min-max normalize each quantity across the node's candidates.
    Normalized,
    /// Blend the raw values.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Random projections evaluated per node (`K`).
    pub num_candidates: usize,
    /// Weight of the variance term in boosted nodes; `1 - lambda` weighs unbalance.
    pub lambda: f64,
    /// Deepest level (root = 0) at which likelihood boosting applies.
    pub boost_depth: usize,
    pub max_leaf_size: usize,
    pub seed: u64,
    pub mode: TreeMode,
    pub scaling: ScoreScaling,
}

impl TreeConfig {
    pub fn balanced(seed: u64) -> Self {
        TreeConfig {
            num_candidates: 16,
            lambda: 0.5,
            boost_depth: 3,
            max_leaf_size: 8,
            seed,
            mode: TreeMode::Balanced,
            scaling: ScoreScaling::Normalized,
        }
    }

    pub fn boosted(seed: u64) -> Self {
        TreeConfig {
            mode: TreeMode::Boosted,
            ..TreeConfig::balanced(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_candidates == 0 {
            return Err(Error::InvalidConfig("num_candidates must be >= 1".into()));
        }
        if self.max_leaf_size == 0 {
            return Err(Error::InvalidConfig("max_leaf_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Whether the builder consults the likelihood profile at all.
    pub fn uses_likelihoods(&self) -> bool {
        self.mode == TreeMode::Boosted && self.lambda < 1.0
    }
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig::balanced(0)
    }
}

/// Index of a node inside a tree.
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Split {
        /// Row into the tree's projection table.
        projection: u32,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        start: u32,
        end: u32,
        depth: u32,
    },
}

/// Read-only view of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode<'a> {
    Split {
        projection: &'a [f32],
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        ids: &'a [EntityId],
        depth: u32,
    },
}

/// A built projection tree (balanced or likelihood-boosted).
///
/// Entities are stored contiguously in leaf order so each leaf scan is a linear pass.
#[derive(Debug, Clone, PartialEq)]
pub struct QlbTree {
    pub(crate) config: TreeConfig,
    pub(crate) nodes: Vec<Node>,
    pub(crate) projections: Vec<f32>,
    pub(crate) points: Points,
    /// Entity ids in the order of the catalog the tree was built from.
    pub(crate) catalog_ids: Vec<EntityId>,
    /// Leaf depth of each entity, aligned with `catalog_ids`.
    pub(crate) depths: Vec<u32>,
    pub(crate) warnings: Vec<String>,
}

impl QlbTree {
    pub const ROOT: NodeId = 0;

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> TreeNode<'_> {
        match self.nodes[id as usize] {
            Node::Split {
                projection,
                threshold,
                left,
                right,
            } => TreeNode::Split {
                projection: self.projection(projection),
                threshold,
                left,
                right,
            },
            Node::Leaf { start, end, depth } => TreeNode::Leaf {
                ids: &self.points.ids()[start as usize..end as usize],
                depth,
            },
        }
    }

    pub(crate) fn projection(&self, row: u32) -> &[f32] {
        let d = self.dim();
        &self.projections[row as usize * d..(row as usize + 1) * d]
    }

    /// Leaves as `(ids, depth)`, left to right.
    pub fn leaves(&self) -> impl Iterator<Item = (&[EntityId], u32)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { start, end, depth } => {
                Some((&self.points.ids()[start as usize..end as usize], depth))
            }
            Node::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    /// Catalog ids and their leaf depths, in catalog order.
    pub fn depth_map(&self) -> impl Iterator<Item = (EntityId, u32)> + '_ {
        self.catalog_ids.iter().copied().zip(self.depths.iter().copied())
    }

    /// Notes recorded while building, e.g. an oversized leaf of identical entities.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Likelihood-weighted mean leaf depth, `sum_i p_i * depth_i`.
    pub fn expected_depth(&self, profile: &LikelihoodProfile) -> Result<f64> {
        if profile.len() != self.depths.len() {
            return Err(Error::InvalidInput(format!(
                "profile has {} entries, tree has {} entities",
                profile.len(),
                self.depths.len()
            )));
        }
        Ok(profile
            .probabilities()
            .iter()
            .zip(&self.depths)
            .map(|(p, &d)| p * d as f64)
            .sum())
    }
}

#[cfg(test)]
mod tests;
