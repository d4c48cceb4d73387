//! Catalog-level domain types: vectors, entity records and the searchable catalog.

use std::collections::HashSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entity identifier. 32 bits so ids round-trip through ivecs files.
pub type EntityId = u32;

/// Tolerance on the sum of a likelihood profile.
pub const LIKELIHOOD_SUM_TOLERANCE: f64 = 1e-9;

/// A finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(Vec<f32>);

impl Vector {
    pub fn new(components: Vec<f32>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("vector must have dim >= 1".into()));
        }
        if let Some(pos) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "vector component {pos} is not finite"
            )));
        }
        Ok(Vector(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl AsRef<[f32]> for Vector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

impl TryFrom<Vec<f32>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f32>) -> Result<Self> {
        Vector::new(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: EntityId,
    pub embedding: Vector,
    pub likelihood: Option<f64>,
}

impl EntityRecord {
    pub fn new(id: EntityId, embedding: Vector) -> Self {
        EntityRecord {
            id,
            embedding,
            likelihood: None,
        }
    }
}

/// The searchable dataset. All embeddings share one dimension and ids are unique.
///
/// Likelihoods are all-or-nothing: either every record carries one and they sum to 1
/// (within [`LIKELIHOOD_SUM_TOLERANCE`]), or none does. Inputs outside the tolerance are
/// rejected, never renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    records: Vec<EntityRecord>,
    dim: Option<usize>,
    likelihoods_present: bool,
}

impl Catalog {
    pub fn new(records: Vec<EntityRecord>) -> Result<Self> {
        let dim = records.first().map(|r| r.embedding.dim());
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if Some(r.embedding.dim()) != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    found: r.embedding.dim(),
                });
            }
            if !seen.insert(r.id) {
                return Err(Error::InvalidInput(format!("duplicate entity id {}", r.id)));
            }
        }

        let with_likelihood = records.iter().filter(|r| r.likelihood.is_some()).count();
        if with_likelihood != 0 && with_likelihood != records.len() {
            return Err(Error::InvalidInput(
                "likelihoods must be present on all records or none".into(),
            ));
        }
        let likelihoods_present = with_likelihood > 0;
        if likelihoods_present {
            let mut sum = 0.0;
            for r in &records {
                let p = r.likelihood.unwrap_or_default();
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidInput(format!(
                        "likelihood {p} of entity {} outside [0, 1]",
                        r.id
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > LIKELIHOOD_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "likelihoods sum to {sum}, expected 1"
                )));
            }
        }

        Ok(Catalog {
            records,
            dim,
            likelihoods_present,
        })
    }

    /// Builds a catalog whose ids are the row positions `0..n`.
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self> {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| Ok(EntityRecord::new(i as EntityId, Vector::new(row)?)))
            .collect::<Result<Vec<_>>>()?;
        Catalog::new(records)
    }

    pub fn empty() -> Self {
        Catalog {
            records: Vec::new(),
            dim: None,
            likelihoods_present: false,
        }
    }

    /// Attaches one likelihood per record, in catalog order.
    pub fn with_likelihoods(mut self, probabilities: &[f64]) -> Result<Self> {
        if probabilities.len() != self.records.len() {
            return Err(Error::InvalidInput(format!(
                "{} likelihoods for {} records",
                probabilities.len(),
                self.records.len()
            )));
        }
        for (r, &p) in self.records.iter_mut().zip(probabilities) {
            r.likelihood = Some(p);
        }
        Catalog::new(self.records)
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `None` for an empty catalog.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn likelihoods_present(&self) -> bool {
        self.likelihoods_present
    }

    pub fn likelihoods(&self) -> Option<Vec<f64>> {
        self.likelihoods_present
            .then(|| self.records.iter().map(|r| r.likelihood.unwrap_or_default()).collect())
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.records.iter().map(|r| r.id)
    }

    pub fn embedding(&self, index: usize) -> &Vector {
        &self.records[index].embedding
    }

    /// Catalog of the records at `indices`; likelihoods are dropped because a subset no
    /// longer sums to 1.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                let r = &self.records[i];
                EntityRecord::new(r.id, r.embedding.clone())
            })
            .collect();
        Catalog::new(records)
    }
}
