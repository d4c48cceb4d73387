use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::result::{SearchStats, TopK};
use crate::types::{Catalog, EntityId};

/// Row-major embedding storage paired with entity ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    ids: Vec<EntityId>,
    data: Vec<f32>,
}

impl Points {
    pub fn from_catalog(catalog: &Catalog) -> Result<Self> {
        let dim = catalog
            .dim()
            .ok_or_else(|| Error::InvalidInput("catalog is empty".into()))?;
        let mut data = Vec::with_capacity(catalog.len() * dim);
        for r in catalog.records() {
            data.extend_from_slice(r.embedding.as_slice());
        }
        Ok(Points {
            dim,
            ids: catalog.ids().collect(),
            data,
        })
    }

    pub fn new(dim: usize, ids: Vec<EntityId>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dim must be >= 1".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidInput(format!(
                "{} floats for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        Ok(Points { dim, ids, data })
    }

    /// Rows at `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Points {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.ids[r]);
        }
        Points {
            dim: self.dim,
            ids,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Scans rows `range` into `top`, counting distance computations.
    #[inline]
    pub(crate) fn scan_into(
        &self,
        range: std::ops::Range<usize>,
        query: &[f32],
        top: &mut TopK,
        stats: &mut SearchStats,
    ) {
        for i in range {
            top.push(self.ids[i], crate::distance::squared_l2(self.row(i), query));
            stats.distance_computations += 1;
        }
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.put_u32(self.dim as u32);
        enc.put_u32_slice(&self.ids);
        enc.put_f32_slice(&self.data);
    }

    pub(crate) fn decode(dec: &mut Decoder) -> Result<Self> {
        let dim = dec.u32()? as usize;
        let ids = dec.u32_vec()?;
        let data = dec.f32_vec()?;
        Points::new(dim, ids, data).map_err(|e| dec.error(e.to_string()))
    }
}
