use rayon::prelude::*;

use crate::error::Result;
use crate::flat::FlatIndex;
use crate::types::{Catalog, EntityId, Vector};

/// Exact top-`k` ids per query, by brute force.
pub fn compute_ground_truth(
    catalog: &Catalog,
    queries: &[Vector],
    k: usize,
) -> Result<Vec<Vec<EntityId>>> {
    let index = FlatIndex::build(catalog)?;
    queries
        .par_iter()
        .map(|q| index.search(q, k).map(|(r, _)| r.ids()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{quadratic_oracle, random_catalog};

    #[test]
    fn matches_second_brute_implementation() {
        let catalog = random_catalog(50, 6, 1);
        let queries: Vec<Vector> = random_catalog(10, 6, 2)
            .records()
            .iter()
            .map(|r| r.embedding.clone())
            .collect();
        let gt = compute_ground_truth(&catalog, &queries, 5).unwrap();
        for (q, row) in queries.iter().zip(&gt) {
            assert_eq!(row, &quadratic_oracle(&catalog, q, 5));
        }
    }

    #[test]
    fn self_query_and_exhaustive_k() {
        let catalog = random_catalog(12, 3, 4);
        let q = vec![catalog.embedding(7).clone()];
        let gt = compute_ground_truth(&catalog, &q, 12).unwrap();
        assert_eq!(gt[0][0], 7);
        assert_eq!(gt[0].len(), 12);
        assert!(compute_ground_truth(&catalog, &[Vector::new(vec![1.0]).unwrap()], 1).is_err());
    }
}
