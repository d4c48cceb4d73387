//! Approximate nearest neighbor search for small-footprint devices.
//!
//! The crate provides query-likelihood boosted projection trees ([`rptree`]), a two-level
//! search that routes queries through a k-means partition ([`twolevel`]), the classic
//! building blocks it composes ([`flat`], [`kdtree`], [`lsh`], [`cluster`]), and a
//! benchmark harness that measures recall against deterministic cost counters
//! ([`bench`]).

pub mod bench;
pub mod bundle;
pub mod cli;
pub mod cluster;
pub mod codec;
pub mod distance;
pub mod error;
pub mod flat;
pub mod io;
pub mod kdtree;
pub mod lsh;
pub mod points;
mod result;
pub mod rptree;
pub mod seed;
pub mod twolevel;
mod types;

#[cfg(test)]
mod testutil;

pub use distance::euclidean_distance;
pub use error::{Error, Result};
pub use flat::FlatIndex;
pub use kdtree::KdTree;
pub use lsh::{LshConfig, LshIndex};
pub use points::Points;
pub use result::{merge_top_k, Neighbor, ResultSet, SearchStats};
pub use rptree::{ProbeBudget, QlbTree, TreeConfig, TreeMode};
pub use types::{Catalog, EntityId, EntityRecord, Vector, LIKELIHOOD_SUM_TOLERANCE};
pub use twolevel::{build_two_level, recommend_config, TwoLevelConfig, TwoLevelIndex};
