use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::result::SearchStats;
use crate::seed;
use crate::types::Vector;

use super::kmeans::{kmeans, KMeansConfig};

const MAGIC: &[u8; 4] = b"PQCB";

/// Subspace count used when none is configured: 8 for d >= 64, otherwise about d/4.
pub fn default_subspaces(dim: usize) -> usize {
    if dim >= 64 {
        8
    } else {
        ((dim as f64 / 4.0).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqConfig {
    /// `None` picks [`default_subspaces`].
    pub num_subspaces: Option<usize>,
    pub codewords: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl PqConfig {
    pub fn with_seed(seed: u64) -> Self {
        PqConfig {
            num_subspaces: None,
            codewords: 256,
            max_iters: 20,
            seed,
        }
    }
}

/// One code byte per subspace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PqCode(pub Vec<u8>);

/// Per-subspace codebooks. Dimensions not divisible by the subspace count are
/// zero-padded at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    dim: usize,
    m: usize,
    sub_dim: usize,
    codewords: usize,
    /// `m * codewords * sub_dim`, subspace-major.
    centroids: Vec<f32>,
    warnings: Vec<String>,
}

impl PqCodebook {
    /// Trains on row-major `data` of dimension `dim`.
    pub fn train(data: &[f32], dim: usize, cfg: &PqConfig) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput("PQ training needs at least one full row".into()));
        }
        let n = data.len() / dim;
        let m = cfg.num_subspaces.unwrap_or_else(|| default_subspaces(dim));
        if m == 0 || m > dim {
            return Err(Error::InvalidConfig(format!("{m} subspaces for dim {dim}")));
        }
        if cfg.codewords == 0 || cfg.codewords > 256 {
            return Err(Error::InvalidConfig("codewords must be in 1..=256".into()));
        }
        let mut warnings = Vec::new();
        let codewords = if n < cfg.codewords {
            let w = format!("{n} training vectors; codewords clamped from {} to {n}", cfg.codewords);
            log::warn!("{w}");
            warnings.push(w);
            n
        } else {
            cfg.codewords
        };
        let sub_dim = dim.div_ceil(m);
        let mut centroids = Vec::with_capacity(m * codewords * sub_dim);
        let mut sub = vec![0.0f32; n * sub_dim];
        for s in 0..m {
            for i in 0..n {
                let row = &data[i * dim..(i + 1) * dim];
                let out = &mut sub[i * sub_dim..(i + 1) * sub_dim];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = row.get(s * sub_dim + j).copied().unwrap_or(0.0);
                }
            }
            let km = KMeansConfig {
                k: codewords,
                max_iters: cfg.max_iters,
                tolerance: 1e-6,
                seed: seed::indexed_seed(cfg.seed, s as u64),
            };
            let r = kmeans(&sub, sub_dim, &km)?;
            for c in &r.partition.centroids {
                centroids.extend_from_slice(c.as_slice());
            }
        }
        Ok(PqCodebook {
            dim,
            m,
            sub_dim,
            codewords,
            centroids,
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn codewords(&self) -> usize {
        self.codewords
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Codeword `c` of subspace `s`, including padding.
    pub fn codeword(&self, s: usize, c: usize) -> &[f32] {
        let at = (s * self.codewords + c) * self.sub_dim;
        &self.centroids[at..at + self.sub_dim]
    }

    fn sub_component(&self, x: &[f32], s: usize, j: usize) -> f64 {
        x.get(s * self.sub_dim + j).copied().unwrap_or(0.0) as f64
    }

    /// Nearest codeword per subspace; ties go to the lower index.
    pub fn encode(&self, x: &[f32]) -> Result<PqCode> {
        Error::check_dim(self.dim, x.len())?;
        let code = (0..self.m)
            .map(|s| {
                let mut best = (0u8, f64::INFINITY);
                for c in 0..self.codewords {
                    let d: f64 = self
                        .codeword(s, c)
                        .iter()
                        .enumerate()
                        .map(|(j, &w)| (self.sub_component(x, s, j) - w as f64).powi(2))
                        .sum();
                    if d < best.1 {
                        best = (c as u8, d);
                    }
                }
                best.0
            })
            .collect();
        Ok(PqCode(code))
    }

    pub fn encode_rows(&self, data: &[f32]) -> Result<Vec<PqCode>> {
        data.chunks_exact(self.dim).map(|r| self.encode(r)).collect()
    }

    /// Reconstruction with padding dropped.
    pub fn decode(&self, code: &PqCode) -> Result<Vector> {
        self.check_code(code)?;
        let mut out = Vec::with_capacity(self.m * self.sub_dim);
        for (s, &c) in code.0.iter().enumerate() {
            out.extend_from_slice(self.codeword(s, c as usize));
        }
        out.truncate(self.dim);
        Vector::new(out)
    }

    fn check_code(&self, code: &PqCode) -> Result<()> {
        if code.0.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "code has {} bytes, codebook has {} subspaces",
                code.0.len(),
                self.m
            )));
        }
        if let Some(&c) = code.0.iter().find(|&&c| c as usize >= self.codewords) {
            return Err(Error::InvalidInput(format!("codeword {c} out of range")));
        }
        Ok(())
    }

    /// Squared distances from the query's subvectors to every codeword.
    pub fn adc_table(&self, query: &[f32]) -> Result<AdcTable> {
        Error::check_dim(self.dim, query.len())?;
        let mut table = Vec::with_capacity(self.m * self.codewords);
        for s in 0..self.m {
            for c in 0..self.codewords {
                table.push(
                    self.codeword(s, c)
                        .iter()
                        .enumerate()
                        .map(|(j, &w)| (self.sub_component(query, s, j) - w as f64).powi(2))
                        .sum(),
                );
            }
        }
        Ok(AdcTable {
            codewords: self.codewords,
            table,
        })
    }

    pub(crate) fn encode_into(&self, enc: &mut Encoder) {
        enc.put_u32(self.dim as u32);
        enc.put_u32(self.m as u32);
        enc.put_u32(self.sub_dim as u32);
        enc.put_u32(self.codewords as u32);
        enc.put_f32_slice(&self.centroids);
    }

    pub(crate) fn decode_from(dec: &mut Decoder) -> Result<Self> {
        let dim = dec.u32()? as usize;
        let m = dec.u32()? as usize;
        let sub_dim = dec.u32()? as usize;
        let codewords = dec.u32()? as usize;
        let centroids = dec.f32_vec()?;
        if m == 0 || sub_dim != dim.div_ceil(m) || codewords == 0 || codewords > 256 {
            return Err(dec.error("inconsistent PQ codebook shape"));
        }
        if centroids.len() != m * codewords * sub_dim {
            return Err(dec.error("PQ centroid count does not match shape"));
        }
        Ok(PqCodebook {
            dim,
            m,
            sub_dim,
            codewords,
            centroids,
            warnings: Vec::new(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC);
        self.encode_into(&mut enc);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC)?;
        let cb = Self::decode_from(&mut dec)?;
        dec.finish()?;
        Ok(cb)
    }
}

/// Lookup table for asymmetric distance computation against one query.
#[derive(Debug, Clone)]
pub struct AdcTable {
    codewords: usize,
    table: Vec<f64>,
}

impl AdcTable {
    pub fn squared_distance(&self, code: &PqCode) -> f64 {
        code.0
            .iter()
            .enumerate()
            .map(|(s, &c)| self.table[s * self.codewords + c as usize])
            .sum()
    }

    pub fn distance(&self, code: &PqCode) -> f64 {
        self.squared_distance(code).sqrt()
    }
}

/// Distance from an uncompressed query to the reconstruction of `code`.
pub fn adc_distance(codebook: &PqCodebook, query: &[f32], code: &PqCode) -> Result<f64> {
    codebook.check_code(code)?;
    Ok(codebook.adc_table(query)?.distance(code))
}

/// Indices of the `n_probe` codes nearest the query by ADC, ties by index. One distance
/// computation is counted per code.
pub fn pq_top_search(
    codebook: &PqCodebook,
    codes: &[PqCode],
    query: &[f32],
    n_probe: usize,
) -> Result<(Vec<usize>, SearchStats)> {
    let table = codebook.adc_table(query)?;
    let mut scored: Vec<(f64, usize)> = codes
        .iter()
        .enumerate()
        .map(|(i, c)| (table.squared_distance(c), i))
        .collect();
    let n = n_probe.min(scored.len());
    let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < scored.len() && n > 0 {
        scored.select_nth_unstable_by(n - 1, by);
    }
    scored.truncate(n);
    scored.sort_unstable_by(by);
    let stats = SearchStats {
        distance_computations: codes.len() as u64,
        nodes_visited: 1,
        ..SearchStats::default()
    };
    Ok((scored.into_iter().map(|(_, i)| i).collect(), stats))
}
