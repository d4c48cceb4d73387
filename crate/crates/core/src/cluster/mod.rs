//! K-means partitioning and product quantization with asymmetric distances.

mod kmeans;
mod pq;

pub use kmeans::{assign_nearest, kmeans, KMeansConfig, KMeansResult, Partition};
pub use pq::{adc_distance, default_subspaces, pq_top_search, AdcTable, PqCode, PqCodebook, PqConfig};
