use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{Catalog, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Per-coordinate standard deviation around each center.
    pub spread: f32,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(num: usize, dim: usize, clusters: usize, seed: u64) -> Self {
        SyntheticConfig {
            num,
            dim,
            clusters,
            spread: 0.05,
            seed,
        }
    }

    pub fn with_spread(mut self, spread: f32) -> Self {
        self.spread = spread;
        self
    }
}

/// Gaussian mixture with centers drawn uniformly from the unit cube.
#[derive(Debug, Clone)]
pub struct SyntheticMixture {
    centers: Vec<Vec<f32>>,
    spread: f32,
}

impl SyntheticMixture {
    pub fn new(dim: usize, clusters: usize, spread: f32, seed: u64) -> Result<Self> {
        if dim == 0 || clusters == 0 {
            return Err(Error::InvalidConfig("dim and clusters must be >= 1".into()));
        }
        if !(spread.is_finite() && spread >= 0.0) {
            return Err(Error::InvalidConfig(format!("spread {spread} must be >= 0")));
        }
        let mut rng = seed::rng(seed::sub_seed(seed, "centers"));
        let centers = (0..clusters)
            .map(|_| (0..dim).map(|_| rng.random::<f32>()).collect())
            .collect();
        Ok(SyntheticMixture { centers, spread })
    }

    pub fn centers(&self) -> &[Vec<f32>] {
        &self.centers
    }

    /// Draws `n` points; point `i` belongs to cluster `i % clusters`.
    pub fn sample(&self, n: usize, seed: u64) -> (Vec<Vector>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let normal = Normal::new(0.0f32, self.spread.max(f32::MIN_POSITIVE)).unwrap();
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % self.centers.len();
            let p: Vec<f32> = self.centers[c]
                .iter()
                .map(|&x| {
                    if self.spread == 0.0 {
                        x
                    } else {
                        x + normal.sample(&mut rng)
                    }
                })
                .collect();
            points.push(Vector::new(p).expect("finite by construction"));
            labels.push(c);
        }
        (points, labels)
    }

    /// Fresh points from the same mixture, e.g. held-out queries.
    pub fn sample_queries(&self, n: usize, seed: u64) -> Vec<Vector> {
        self.sample(n, seed::sub_seed(seed, "queries")).0
    }
}

/// Catalog drawn from a Gaussian mixture, plus the generating cluster of each entity.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(Catalog, SyntheticMixture, Vec<usize>)> {
    if cfg.num == 0 || cfg.clusters == 0 || cfg.num < cfg.clusters {
        return Err(Error::InvalidConfig(format!(
            "need num >= clusters >= 1 (num={}, clusters={})",
            cfg.num, cfg.clusters
        )));
    }
    let mixture = SyntheticMixture::new(cfg.dim, cfg.clusters, cfg.spread, cfg.seed)?;
    let (points, labels) = mixture.sample(cfg.num, seed::sub_seed(cfg.seed, "points"));
    let catalog = Catalog::from_rows(points.into_iter().map(Vector::into_inner).collect())?;
    Ok((catalog, mixture, labels))
}
