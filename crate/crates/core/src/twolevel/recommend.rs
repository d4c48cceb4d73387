use serde::{Deserialize, Serialize};

use crate::kdtree::KD_MAX_EFFECTIVE_DIM;
use crate::rptree::TreeMode;

use super::config::{BottomKind, TopKind, TwoLevelConfig};

/// Catalogs below this many entities are served by a single tree.
pub const ONE_LEVEL_MAX: usize = 30_000;
/// Partition features with at most this many dimensions count as low-dimensional.
pub const LOW_DIM_MAX: usize = KD_MAX_EFFECTIVE_DIM;
/// Mean subset size the partition aims for, and the brute/tree cutoff for bottoms.
pub const TARGET_SUBSET_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    OneLevel { mode: TreeMode },
    TwoLevel(Box<TwoLevelConfig>),
}

/// Index layout for a catalog of `dataset_size` entities.
///
/// Small catalogs get one tree, boosted when traffic is known. Larger ones get two
/// levels: a PQ top with brute bottoms over ~100-entity subsets when partitioning on a
/// high-dimensional feature (the embedding when `partition_feature_dim` is `None`), or
/// a kd-tree top when the feature is low-dimensional, with brute bottoms up to 100
/// entities per subset and trees above that.
pub fn recommend_config(
    dataset_size: usize,
    traffic_available: bool,
    partition_feature_dim: Option<usize>,
    expected_subset_size: Option<usize>,
) -> Recommendation {
    let mode = if traffic_available {
        TreeMode::Boosted
    } else {
        TreeMode::Balanced
    };
    if dataset_size < ONE_LEVEL_MAX {
        return Recommendation::OneLevel { mode };
    }
    let low_dim = partition_feature_dim.is_some_and(|d| d <= LOW_DIM_MAX);
    let subset = if low_dim {
        expected_subset_size.unwrap_or(TARGET_SUBSET_SIZE).max(1)
    } else {
        TARGET_SUBSET_SIZE
    };
    let num_subsets = ((dataset_size as f64 / subset as f64).round() as usize).clamp(1, dataset_size);
    let mut cfg = TwoLevelConfig::new(num_subsets, 0);
    if low_dim {
        cfg.top = TopKind::KdTree;
        cfg.partition_feature = super::PartitionFeature::External;
        cfg.bottom = if subset <= TARGET_SUBSET_SIZE {
            BottomKind::Brute
        } else {
            BottomKind::Tree
        };
        cfg.tree.mode = mode;
    } else {
        cfg.top = TopKind::Pq;
        cfg.bottom = BottomKind::Brute;
    }
    Recommendation::TwoLevel(Box::new(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(r: Recommendation) -> TwoLevelConfig {
        match r {
            Recommendation::TwoLevel(c) => *c,
            other => panic!("expected two-level, got {other:?}"),
        }
    }

    #[test]
    fn guideline_examples() {
        assert_eq!(
            recommend_config(10_000, true, None, None),
            Recommendation::OneLevel { mode: TreeMode::Boosted }
        );
        let c = two(recommend_config(1_000_000, false, Some(128), None));
        assert_eq!((c.top, c.bottom, c.num_subsets), (TopKind::Pq, BottomKind::Brute, 10_000));
        let c = two(recommend_config(50_000, false, Some(2), Some(200)));
        assert_eq!((c.top, c.bottom, c.num_subsets), (TopKind::KdTree, BottomKind::Tree, 250));
    }

    #[test]
    fn boundaries() {
        assert_eq!(
            recommend_config(29_999, false, None, None),
            Recommendation::OneLevel { mode: TreeMode::Balanced }
        );
        assert_eq!(two(recommend_config(30_000, false, None, None)).num_subsets, 300);
        assert_eq!(two(recommend_config(30_000, false, Some(2), Some(100))).bottom, BottomKind::Brute);
        assert_eq!(two(recommend_config(30_000, false, Some(2), Some(101))).bottom, BottomKind::Tree);
        assert_eq!(two(recommend_config(30_000, false, Some(9), Some(500))).top, TopKind::Pq);
        assert_eq!(recommend_config(1, true, None, None), recommend_config(1, true, None, None));
    }
}
