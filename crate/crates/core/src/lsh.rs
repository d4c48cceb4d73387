//! Hyperplane LSH over a fixed shared pool of random projections.
//!
//! Every table draws its `B` signature bits from one pool of `pool_size` unit vectors, so
//! the stored projection floats are `pool_size * d` no matter how many tables there are.
//! Hyperplanes pass through the catalog mean rather than the origin, so data far from the
//! origin still splits evenly. Search probes every bucket within a Hamming radius of the
//! query signature and re-ranks the union of candidates exactly.

use std::time::Instant;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::distance::dot;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::result::{ResultSet, SearchStats, TopK};
use crate::seed;
use crate::types::Catalog;

const MAGIC: &[u8; 4] = b"LSHX";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LshConfig {
    pub pool_size: usize,
    pub num_tables: usize,
    pub bits_per_table: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        LshConfig {
            pool_size: 64,
            num_tables: 8,
            bits_per_table: 12,
            seed: 0,
        }
    }
}

impl LshConfig {
    pub fn with_seed(seed: u64) -> Self {
        LshConfig {
            seed,
            ..LshConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_table == 0 || self.bits_per_table > 64 {
            return Err(Error::InvalidConfig(format!(
                "bits_per_table {} outside 1..=64",
                self.bits_per_table
            )));
        }
        if self.num_tables == 0 {
            return Err(Error::InvalidConfig("num_tables must be >= 1".into()));
        }
        if self.bits_per_table > self.pool_size {
            return Err(Error::InvalidConfig(format!(
                "bits_per_table {} exceeds pool_size {}",
                self.bits_per_table, self.pool_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    /// Pool rows used for bits `0..B`.
    bits: Vec<u32>,
    /// Sorted distinct signatures with `[start, end)` ranges into `members`.
    buckets: Vec<(u64, u32, u32)>,
    /// Row indices grouped by bucket, ascending within a bucket.
    members: Vec<u32>,
}

impl Table {
    fn bucket(&self, signature: u64) -> Option<&[u32]> {
        self.buckets
            .binary_search_by_key(&signature, |b| b.0)
            .ok()
            .map(|i| {
                let (_, s, e) = self.buckets[i];
                &self.members[s as usize..e as usize]
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LshIndex {
    config: LshConfig,
    pool: Vec<f32>,
    /// Projection of the catalog mean on each pool row.
    offsets: Vec<f64>,
    tables: Vec<Table>,
    points: Points,
}

/// Bit `t` of a signature is set when the projection on pool row `bits[t]` is at least
/// that row's offset.
fn signature(bits: &[u32], signs: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (t, &row)| acc | ((signs[row as usize] as u64) << t))
}

impl LshIndex {
    pub fn build(catalog: &Catalog, cfg: &LshConfig) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty catalog".into()));
        }
        LshIndex::build_points(Points::from_catalog(catalog)?, cfg)
    }

    pub(crate) fn build_points(points: Points, cfg: &LshConfig) -> Result<Self> {
        cfg.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty catalog".into()));
        }
        let dim = points.dim();
        let mut rng = seed::rng(cfg.seed);
        let mut pool = Vec::with_capacity(cfg.pool_size * dim);
        for _ in 0..cfg.pool_size {
            loop {
                let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    pool.extend(g.iter().map(|x| (x / norm) as f32));
                    break;
                }
            }
        }
        let table_bits: Vec<Vec<u32>> = (0..cfg.num_tables)
            .map(|_| {
                index::sample(&mut rng, cfg.pool_size, cfg.bits_per_table)
                    .into_iter()
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();

        let mut mean = vec![0.0f64; dim];
        for row in points.rows() {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x as f64;
            }
        }
        let offsets: Vec<f64> = pool
            .chunks_exact(dim)
            .map(|v| v.iter().zip(&mean).map(|(&a, m)| a as f64 * m).sum::<f64>() / points.len() as f64)
            .collect();
        let signs: Vec<Vec<bool>> = points.rows().map(|row| signs_of(&pool, &offsets, row)).collect();

        let tables = table_bits
            .into_iter()
            .map(|bits| {
                let mut keyed: Vec<(u64, u32)> = signs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (signature(&bits, s), i as u32))
                    .collect();
                keyed.sort_unstable();
                let mut buckets: Vec<(u64, u32, u32)> = Vec::new();
                for (pos, &(sig, _)) in keyed.iter().enumerate() {
                    match buckets.last_mut() {
                        Some(last) if last.0 == sig => last.2 = pos as u32 + 1,
                        _ => buckets.push((sig, pos as u32, pos as u32 + 1)),
                    }
                }
                Table {
                    bits,
                    buckets,
                    members: keyed.into_iter().map(|(_, i)| i).collect(),
                }
            })
            .collect();

        Ok(LshIndex {
            config: cfg.clone(),
            pool,
            offsets,
            tables,
            points,
        })
    }

    pub fn config(&self) -> &LshConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of stored projection floats (`pool_size * d`).
    pub fn projection_floats(&self) -> usize {
        self.pool.len()
    }

    /// Signature of `x` in every table.
    pub fn signatures(&self, x: &[f32]) -> Result<Vec<u64>> {
        Error::check_dim(self.dim(), x.len())?;
        let signs = self.signs(x);
        Ok(self.tables.iter().map(|t| signature(&t.bits, &signs)).collect())
    }

    fn signs(&self, x: &[f32]) -> Vec<bool> {
        signs_of(&self.pool, &self.offsets, x)
    }

    /// Buckets in each table, `(signature, size)`, ascending by signature.
    pub fn bucket_sizes(&self, table: usize) -> Vec<(u64, usize)> {
        self.tables[table]
            .buckets
            .iter()
            .map(|&(s, a, b)| (s, (b - a) as usize))
            .collect()
    }

    /// Candidates are every entity whose signature is within `multiprobe_radius` bits of
    /// the query's in at least one table; they are re-ranked by exact distance.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        multiprobe_radius: usize,
    ) -> Result<(ResultSet, SearchStats)> {
        Error::check_dim(self.dim(), query.len())?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let start = Instant::now();
        let mut stats = SearchStats::default();
        let signs = self.signs(query);
        stats.projections = self.config.pool_size as u64;

        let mut seen = vec![false; self.len()];
        let mut top = TopK::new(k);
        let bits = self.config.bits_per_table;
        let radius = multiprobe_radius.min(bits);
        for table in &self.tables {
            let q = signature(&table.bits, &signs);
            let mut visit = |members: &[u32], stats: &mut SearchStats| {
                stats.leaves_probed += 1;
                for &m in members {
                    let m = m as usize;
                    if !seen[m] {
                        seen[m] = true;
                        self.points.scan_into(m..m + 1, query, &mut top, stats);
                    }
                }
            };
            if hamming_ball_size(bits, radius) > table.buckets.len() as u128 {
                for &(sig, s, e) in &table.buckets {
                    if ((sig ^ q).count_ones() as usize) <= radius {
                        visit(&table.members[s as usize..e as usize], &mut stats);
                    }
                }
            } else {
                for_each_in_ball(q, bits, radius, |sig| {
                    if let Some(members) = table.bucket(sig) {
                        visit(members, &mut stats);
                    }
                });
            }
        }
        stats.nodes_visited = stats.leaves_probed;
        stats.wall_time = start.elapsed();
        Ok((top.into_result(), stats))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC);
        let c = &self.config;
        enc.put_u32(c.pool_size as u32);
        enc.put_u32(c.num_tables as u32);
        enc.put_u32(c.bits_per_table as u32);
        enc.put_u64(c.seed);
        self.points.encode(&mut enc);
        enc.put_f32_slice(&self.pool);
        for &o in &self.offsets {
            enc.put_f64(o);
        }
        for t in &self.tables {
            enc.put_u32_slice(&t.bits);
            enc.put_u64(t.buckets.len() as u64);
            for &(sig, s, e) in &t.buckets {
                enc.put_u64(sig);
                enc.put_u32(s);
                enc.put_u32(e);
            }
            enc.put_u32_slice(&t.members);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC)?;
        let config = LshConfig {
            pool_size: dec.u32()? as usize,
            num_tables: dec.u32()? as usize,
            bits_per_table: dec.u32()? as usize,
            seed: dec.u64()?,
        };
        config.validate()?;
        let points = Points::decode(&mut dec)?;
        let pool = dec.f32_vec()?;
        if pool.len() != config.pool_size * points.dim() {
            return Err(dec.error("projection pool size does not match config"));
        }
        let offsets = (0..config.pool_size).map(|_| dec.f64()).collect::<Result<Vec<_>>>()?;
        let mut tables = Vec::with_capacity(config.num_tables);
        for _ in 0..config.num_tables {
            let bits = dec.u32_vec()?;
            let n = dec.u64()? as usize;
            let mut buckets = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                buckets.push((dec.u64()?, dec.u32()?, dec.u32()?));
            }
            let members = dec.u32_vec()?;
            if members.len() != points.len()
                || bits.len() != config.bits_per_table
                || buckets.iter().any(|&(_, s, e)| s > e || e as usize > members.len())
            {
                return Err(dec.error("inconsistent LSH table"));
            }
            tables.push(Table {
                bits,
                buckets,
                members,
            });
        }
        dec.finish()?;
        Ok(LshIndex {
            config,
            pool,
            offsets,
            tables,
            points,
        })
    }
}

fn signs_of(pool: &[f32], offsets: &[f64], x: &[f32]) -> Vec<bool> {
    pool.chunks_exact(x.len())
        .zip(offsets)
        .map(|(v, &o)| dot(v, x) >= o)
        .collect()
}

fn hamming_ball_size(bits: usize, radius: usize) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for r in 0..=radius {
        total += c;
        c = c * (bits - r) as u128 / (r + 1) as u128;
    }
    total
}

/// Visits every `bits`-bit signature within Hamming distance `radius` of `center`, by
/// increasing distance.
fn for_each_in_ball(center: u64, bits: usize, radius: usize, mut f: impl FnMut(u64)) {
    fn flips(center: u64, from: usize, bits: usize, left: usize, f: &mut impl FnMut(u64)) {
        if left == 0 {
            f(center);
            return;
        }
        for b in from..bits {
            flips(center ^ (1 << b), b + 1, bits, left - 1, f);
        }
    }
    for r in 0..=radius {
        flips(center, 0, bits, r, &mut f);
    }
}
