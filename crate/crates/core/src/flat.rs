//! Exact brute-force search over contiguous storage.

use std::time::Instant;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::result::{ResultSet, SearchStats, TopK};
use crate::types::Catalog;

const MAGIC: &[u8; 4] = b"FLAT";

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    points: Points,
}

impl FlatIndex {
    pub fn build(catalog: &Catalog) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty catalog".into()));
        }
        Ok(FlatIndex {
            points: Points::from_catalog(catalog)?,
        })
    }

    pub fn from_points(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty catalog".into()));
        }
        Ok(FlatIndex { points })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Exact top-`k`; always evaluates every stored vector.
    pub fn search(&self, query: &[f32], k: usize) -> Result<(ResultSet, SearchStats)> {
        Error::check_dim(self.dim(), query.len())?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let start = Instant::now();
        let mut stats = SearchStats::default();
        let mut top = TopK::new(k);
        self.points.scan_into(0..self.len(), query, &mut top, &mut stats);
        stats.leaves_probed = 1;
        stats.nodes_visited = 1;
        stats.wall_time = start.elapsed();
        Ok((top.into_result(), stats))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC);
        self.points.encode(&mut enc);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC)?;
        let points = Points::decode(&mut dec)?;
        dec.finish()?;
        FlatIndex::from_points(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{quadratic_oracle, random_catalog};

    #[test]
    fn exact_on_random_instance() {
        let catalog = random_catalog(200, 16, 3);
        let index = FlatIndex::build(&catalog).unwrap();
        let queries = random_catalog(20, 16, 4);
        for q in queries.records() {
            let (got, stats) = index.search(&q.embedding, 10).unwrap();
            assert_eq!(got.ids(), quadratic_oracle(&catalog, &q.embedding, 10));
            assert_eq!(stats.distance_computations, 200);
        }
    }

    #[test]
    fn stored_point_comes_first_and_k_is_clamped() {
        let catalog = random_catalog(5, 4, 1);
        let index = FlatIndex::build(&catalog).unwrap();
        let (got, _) = index.search(catalog.embedding(3), 50).unwrap();
        assert_eq!(got.len(), 5);
        assert_eq!(got.neighbors()[0].id, 3);
        assert_eq!(got.neighbors()[0].distance, 0.0);
    }

    #[test]
    fn single_entity_and_errors() {
        let catalog = random_catalog(1, 3, 1);
        let index = FlatIndex::build(&catalog).unwrap();
        assert_eq!(index.search(&[0.0, 0.0, 0.0], 1).unwrap().0.len(), 1);
        assert!(matches!(
            index.search(&[0.0], 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(FlatIndex::build(&Catalog::empty()).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let index = FlatIndex::build(&random_catalog(30, 5, 9)).unwrap();
        assert_eq!(FlatIndex::from_bytes(&index.to_bytes()).unwrap(), index);
    }
}
