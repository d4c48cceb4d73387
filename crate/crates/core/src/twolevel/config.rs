use serde::{Deserialize, Serialize};

use crate::cluster::PqConfig;
use crate::error::{Error, Result};
use crate::lsh::LshConfig;
use crate::rptree::{ProbeBudget, TreeConfig};
use crate::seed::sub_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKind {
    Brute,
    KdTree,
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BottomKind {
    Brute,
    Tree,
    Lsh,
}

/// Which vectors the catalog is partitioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionFeature {
    Embedding,
    External,
}

/// Smallest subset that gets an LSH bottom; smaller ones are scanned directly.
pub const LSH_MIN_SUBSET: usize = 16;

/// Default leaf budget for tree bottoms, about half the leaves of a 100-entity subset.
pub const BOTTOM_TREE_LEAVES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelConfig {
    pub num_subsets: usize,
    /// Subsets searched per query unless overridden at search time.
    pub n_probe: usize,
    pub top: TopKind,
    pub bottom: BottomKind,
    pub partition_feature: PartitionFeature,
    pub kmeans_iters: usize,
    /// Rows used to fit the partition centroids; every row is still assigned.
    pub kmeans_sample: Option<usize>,
    pub pq: PqConfig,
    pub tree: TreeConfig,
    /// Budget for each tree bottom search.
    pub tree_budget: ProbeBudget,
    pub lsh: LshConfig,
    pub lsh_radius: usize,
    pub seed: u64,
}

impl TwoLevelConfig {
    /// Brute top and bottom; sub-configurations seeded from named streams of `seed`.
    pub fn new(num_subsets: usize, seed: u64) -> Self {
        TwoLevelConfig {
            num_subsets,
            n_probe: 8.min(num_subsets.max(1)),
            top: TopKind::Brute,
            bottom: BottomKind::Brute,
            partition_feature: PartitionFeature::Embedding,
            kmeans_iters: 25,
            kmeans_sample: None,
            pq: PqConfig::with_seed(sub_seed(seed, "top")),
            tree: TreeConfig::balanced(sub_seed(seed, "tree")),
            tree_budget: ProbeBudget::Leaves(BOTTOM_TREE_LEAVES),
            lsh: LshConfig {
                pool_size: 16,
                num_tables: 4,
                bits_per_table: 4,
                seed: sub_seed(seed, "lsh"),
            },
            lsh_radius: 1,
            seed,
        }
    }

    pub fn with_top(mut self, top: TopKind) -> Self {
        self.top = top;
        self
    }

    pub fn with_bottom(mut self, bottom: BottomKind) -> Self {
        self.bottom = bottom;
        self
    }

    pub fn with_n_probe(mut self, n_probe: usize) -> Self {
        self.n_probe = n_probe;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subsets == 0 {
            return Err(Error::InvalidConfig("num_subsets must be >= 1".into()));
        }
        if self.n_probe == 0 || self.n_probe > self.num_subsets {
            return Err(Error::InvalidConfig(format!(
                "n_probe {} outside 1..={}",
                self.n_probe, self.num_subsets
            )));
        }
        if self.kmeans_sample == Some(0) {
            return Err(Error::InvalidConfig("kmeans_sample must be >= 1".into()));
        }
        self.tree.validate()?;
        self.tree_budget.validate()?;
        self.lsh.validate()?;
        Ok(())
    }
}
