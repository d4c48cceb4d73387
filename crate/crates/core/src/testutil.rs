//! Shared helpers for unit tests. The oracles here deliberately avoid the crate's
//! distance kernels and selection code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{Catalog, EntityId};

pub(crate) fn random_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

pub(crate) fn random_catalog(n: usize, dim: usize, seed: u64) -> Catalog {
    Catalog::from_rows(random_rows(n, dim, seed)).unwrap()
}

/// Double loop over the catalog with a plain scalar sum-of-squares and a full sort.
pub(crate) fn quadratic_oracle(catalog: &Catalog, query: &[f32], k: usize) -> Vec<EntityId> {
    let mut all: Vec<(f64, EntityId)> = Vec::new();
    for r in catalog.records() {
        let mut s = 0.0f64;
        for j in 0..query.len() {
            let d = r.embedding[j] as f64 - query[j] as f64;
            s += d * d;
        }
        all.push((s.sqrt(), r.id));
    }
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, id)| id).collect()
}
