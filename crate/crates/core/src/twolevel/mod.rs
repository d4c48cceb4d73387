//! Two-level search: partition the catalog, route queries to the nearest subsets through
//! a top index over the centroids, search each selected subset, and merge.

mod config;
mod recommend;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{assign_nearest, kmeans, pq_top_search, KMeansConfig, Partition, PqCode, PqCodebook};
use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::flat::FlatIndex;
use crate::io::LikelihoodProfile;
use crate::kdtree::KdTree;
use crate::lsh::LshIndex;
use crate::points::Points;
use crate::result::{merge_top_k, ResultSet, SearchStats};
use crate::rptree::QlbTree;
use crate::seed::{indexed_seed, rng, sub_seed};
use crate::types::{Catalog, Vector};

pub use config::{BottomKind, PartitionFeature, TopKind, TwoLevelConfig, BOTTOM_TREE_LEAVES, LSH_MIN_SUBSET};
pub use recommend::{recommend_config, Recommendation, LOW_DIM_MAX, ONE_LEVEL_MAX, TARGET_SUBSET_SIZE};

/// Per-entity vectors used only to partition, aligned with the catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFeatures {
    vectors: Vec<Vector>,
}

impl PartitionFeatures {
    pub fn new(vectors: Vec<Vector>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::InvalidInput("no partition features".into()));
        };
        let dim = first.dim();
        for v in &vectors {
            Error::check_dim(dim, v.dim())?;
        }
        Ok(PartitionFeatures { vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Top {
    Brute(FlatIndex),
    KdTree(KdTree),
    Pq { codebook: PqCodebook, codes: Vec<PqCode> },
}

#[derive(Debug, Clone, PartialEq)]
enum Bottom {
    Empty,
    Brute(FlatIndex),
    Tree(QlbTree),
    Lsh(LshIndex),
}

/// What the build actually did, where it differs from the configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    /// Subsets too small for the configured bottom, scanned directly instead.
    pub brute_fallbacks: Vec<usize>,
    pub empty_subsets: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Serialized byte sizes of each component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub partition: usize,
    pub top: usize,
    pub bottoms: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelIndex {
    config: TwoLevelConfig,
    dim: usize,
    feature_dim: usize,
    partition: Partition,
    top: Top,
    bottoms: Vec<Bottom>,
    report: BuildReport,
}

/// Partitions the catalog on `features` (the embeddings when `None`) with k-means.
pub fn build_partition(
    catalog: &Catalog,
    features: Option<&PartitionFeatures>,
    cfg: &TwoLevelConfig,
) -> Result<Partition> {
    cfg.validate()?;
    let (data, dim) = feature_matrix(catalog, features, cfg)?;
    let n = data.len() / dim;
    if n < cfg.num_subsets {
        return Err(Error::InvalidConfig(format!(
            "{} subsets for {n} entities",
            cfg.num_subsets
        )));
    }
    let km = KMeansConfig {
        k: cfg.num_subsets,
        max_iters: cfg.kmeans_iters,
        tolerance: 1e-6,
        seed: sub_seed(cfg.seed, "partition"),
    };
    match cfg.kmeans_sample {
        Some(s) if s < n => {
            let s = s.max(cfg.num_subsets);
            let mut rows: Vec<usize> = (0..n).collect();
            let mut r = rng(sub_seed(cfg.seed, "partition-sample"));
            rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut r);
            rows.truncate(s);
            rows.sort_unstable();
            let sample: Vec<f32> = rows.iter().flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied()).collect();
            let centroids = kmeans(&sample, dim, &km)?.partition.centroids;
            let assignments = assign_nearest(&data, dim, &centroids)?;
            Partition::from_assignments(centroids, assignments)
        }
        _ => Ok(kmeans(&data, dim, &km)?.partition),
    }
}

fn feature_matrix(
    catalog: &Catalog,
    features: Option<&PartitionFeatures>,
    cfg: &TwoLevelConfig,
) -> Result<(Vec<f32>, usize)> {
    match (cfg.partition_feature, features) {
        (PartitionFeature::Embedding, None) => {
            let p = Points::from_catalog(catalog)?;
            let dim = p.dim();
            Ok((p.data().to_vec(), dim))
        }
        (PartitionFeature::External, Some(f)) => {
            if f.len() != catalog.len() {
                return Err(Error::InvalidInput(format!(
                    "{} partition features for {} entities",
                    f.len(),
                    catalog.len()
                )));
            }
            Ok((f.vectors.iter().flat_map(|v| v.iter().copied()).collect(), f.dim()))
        }
        (PartitionFeature::Embedding, Some(_)) => Err(Error::InvalidConfig(
            "external features supplied but partition_feature is embedding".into(),
        )),
        (PartitionFeature::External, None) => Err(Error::InvalidConfig(
            "partition_feature is external but no features were supplied".into(),
        )),
    }
}

/// Builds the full two-level index.
pub fn build_two_level(
    catalog: &Catalog,
    features: Option<&PartitionFeatures>,
    profile: Option<&LikelihoodProfile>,
    cfg: &TwoLevelConfig,
) -> Result<TwoLevelIndex> {
    let partition = build_partition(catalog, features, cfg)?;
    TwoLevelIndex::from_partition(catalog, partition, profile, cfg)
}

impl TwoLevelIndex {
    /// Builds the top and bottom levels over an existing partition, so several
    /// configurations can share one k-means run.
    pub fn from_partition(
        catalog: &Catalog,
        partition: Partition,
        profile: Option<&LikelihoodProfile>,
        cfg: &TwoLevelConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if partition.num_subsets() != cfg.num_subsets {
            return Err(Error::InvalidConfig(format!(
                "partition has {} subsets, config expects {}",
                partition.num_subsets(),
                cfg.num_subsets
            )));
        }
        if partition.assignments.len() != catalog.len() {
            return Err(Error::InvalidInput("partition does not cover the catalog".into()));
        }
        let needs_profile = cfg.bottom == BottomKind::Tree && cfg.tree.uses_likelihoods();
        let catalog_weights = catalog.likelihoods();
        let weights: Option<&[f64]> = match profile {
            Some(p) if p.len() != catalog.len() => {
                return Err(Error::InvalidInput(format!(
                    "profile covers {} entities, catalog has {}",
                    p.len(),
                    catalog.len()
                )))
            }
            Some(p) => Some(p.probabilities()),
            None if needs_profile && catalog_weights.is_none() => {
                return Err(Error::InvalidInput(
                    "boosted tree bottoms need a likelihood profile".into(),
                ))
            }
            None => catalog_weights.as_deref(),
        };
        let points = Points::from_catalog(catalog)?;
        let feature_dim = partition.centroids[0].dim();
        let mut report = BuildReport::default();

        let top = build_top(&partition, cfg, &mut report)?;
        let bottoms: Vec<(Bottom, bool)> = partition
            .subset_members
            .par_iter()
            .enumerate()
            .map(|(i, members)| {
                build_bottom(&points, members, weights, cfg, i)
            })
            .collect::<Result<_>>()?;
        let bottoms: Vec<Bottom> = bottoms
            .into_iter()
            .enumerate()
            .map(|(i, (b, fell_back))| {
                if fell_back {
                    report.brute_fallbacks.push(i);
                }
                if b == Bottom::Empty {
                    report.empty_subsets.push(i);
                }
                b
            })
            .collect();
        Ok(TwoLevelIndex {
            config: cfg.clone(),
            dim: points.dim(),
            feature_dim,
            partition,
            top,
            bottoms,
            report,
        })
    }

    pub fn config(&self) -> &TwoLevelConfig {
        &self.config
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn build_report(&self) -> &BuildReport {
        &self.report
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.partition.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Searches with the configured `n_probe`.
    pub fn search(&self, query: &[f32], feature: Option<&[f32]>, k: usize) -> Result<(ResultSet, SearchStats)> {
        self.search_with(query, feature, k, self.config.n_probe)
    }

    /// `feature` is required when partitioning on external features and must be `None`
    /// otherwise, in which case the query embedding routes the search.
    pub fn search_with(
        &self,
        query: &[f32],
        feature: Option<&[f32]>,
        k: usize,
        n_probe: usize,
    ) -> Result<(ResultSet, SearchStats)> {
        Error::check_dim(self.dim, query.len())?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        if n_probe == 0 {
            return Err(Error::InvalidInput("n_probe must be >= 1".into()));
        }
        let route = match (self.config.partition_feature, feature) {
            (PartitionFeature::Embedding, None) => query,
            (PartitionFeature::External, Some(f)) => f,
            (PartitionFeature::Embedding, Some(_)) => {
                return Err(Error::InvalidInput("index routes on embeddings; drop the query feature".into()))
            }
            (PartitionFeature::External, None) => {
                return Err(Error::InvalidInput("index routes on external features; supply one".into()))
            }
        };
        Error::check_dim(self.feature_dim, route.len())?;
        let start = Instant::now();
        let (subsets, mut stats) = self.route(route, n_probe.min(self.partition.num_subsets()))?;
        let mut partials = Vec::with_capacity(subsets.len());
        for s in subsets {
            let (res, st) = match &self.bottoms[s] {
                Bottom::Empty => continue,
                Bottom::Brute(f) => f.search(query, k)?,
                Bottom::Tree(t) => t.search(query, k, self.config.tree_budget)?,
                Bottom::Lsh(l) => l.search(query, k, self.config.lsh_radius)?,
            };
            stats += st;
            partials.push(res);
        }
        stats.wall_time = start.elapsed();
        Ok((merge_top_k(&partials, k), stats))
    }

    /// Indices of the subsets to search, nearest centroid first.
    fn route(&self, feature: &[f32], n_probe: usize) -> Result<(Vec<usize>, SearchStats)> {
        let (ids, stats) = match &self.top {
            Top::Brute(f) => {
                let (r, s) = f.search(feature, n_probe)?;
                (r.ids().into_iter().map(|i| i as usize).collect(), s)
            }
            Top::KdTree(t) => {
                let (r, s) = t.search(feature, n_probe)?;
                (r.ids().into_iter().map(|i| i as usize).collect(), s)
            }
            Top::Pq { codebook, codes } => pq_top_search(codebook, codes, feature, n_probe)?,
        };
        Ok((ids, stats))
    }

    pub fn footprint(&self) -> Footprint {
        let partition = self.partition_bytes().len();
        let top = self.top_bytes().len();
        let bottoms: Vec<usize> = self.bottoms.iter().map(|b| bottom_bytes(b).len()).collect();
        let total = partition + top + bottoms.iter().sum::<usize>();
        Footprint {
            partition,
            top,
            bottoms,
            total,
        }
    }

    pub(crate) fn partition_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(b"PART");
        enc.put_u32(self.dim as u32);
        self.partition.encode(&mut enc);
        enc.finish()
    }

    pub(crate) fn top_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(b"TOPX");
        match &self.top {
            Top::Brute(f) => {
                enc.put_u8(0);
                enc.put_bytes(&f.to_bytes());
            }
            Top::KdTree(t) => {
                enc.put_u8(1);
                enc.put_bytes(&t.to_bytes());
            }
            Top::Pq { codebook, codes } => {
                enc.put_u8(2);
                codebook.encode_into(&mut enc);
                enc.put_u64(codes.len() as u64);
                for c in codes {
                    enc.put_bytes(&c.0);
                }
            }
        }
        enc.finish()
    }

    /// All bottoms, each length-prefixed, in subset order.
    pub(crate) fn bottoms_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(b"BOTS");
        enc.put_u64(self.bottoms.len() as u64);
        for b in &self.bottoms {
            enc.put_bytes(&bottom_bytes(b));
        }
        enc.finish()
    }

    pub(crate) fn from_component_bytes(
        config: TwoLevelConfig,
        partition: &[u8],
        top: &[u8],
        bottoms: &[u8],
    ) -> Result<Self> {
        config.validate()?;
        let mut dec = Decoder::new(partition, b"PART")?;
        let dim = dec.u32()? as usize;
        let partition = Partition::decode(&mut dec)?;
        dec.finish()?;
        if partition.num_subsets() != config.num_subsets {
            return Err(Error::Format("partition size disagrees with config".into()));
        }
        let feature_dim = partition.centroids.first().map_or(0, |c| c.dim());

        let mut dec = Decoder::new(top, b"TOPX")?;
        let top = match dec.u8()? {
            0 => Top::Brute(FlatIndex::from_bytes(dec.bytes()?)?),
            1 => Top::KdTree(KdTree::from_bytes(dec.bytes()?)?),
            2 => {
                let codebook = PqCodebook::decode_from(&mut dec)?;
                let n = dec.u64()? as usize;
                if n != partition.num_subsets() {
                    return Err(dec.error("PQ code count disagrees with partition"));
                }
                let codes = (0..n)
                    .map(|_| Ok(PqCode(dec.bytes()?.to_vec())))
                    .collect::<Result<Vec<_>>>()?;
                Top::Pq { codebook, codes }
            }
            t => return Err(dec.error(format!("unknown top kind {t}"))),
        };
        dec.finish()?;

        let mut dec = Decoder::new(bottoms, b"BOTS")?;
        let n = dec.u64()? as usize;
        if n != partition.num_subsets() {
            return Err(dec.error("bottom count disagrees with partition"));
        }
        let bottoms = (0..n)
            .map(|_| decode_bottom(dec.bytes()?))
            .collect::<Result<Vec<_>>>()?;
        dec.finish()?;
        let mut report = BuildReport::default();
        for (i, b) in bottoms.iter().enumerate() {
            if *b == Bottom::Empty {
                report.empty_subsets.push(i);
            }
        }
        Ok(TwoLevelIndex {
            config,
            dim,
            feature_dim,
            partition,
            top,
            bottoms,
            report,
        })
    }
}

fn build_top(partition: &Partition, cfg: &TwoLevelConfig, report: &mut BuildReport) -> Result<Top> {
    let centroids = Catalog::from_rows(partition.centroids.iter().map(|c| c.as_slice().to_vec()).collect())?;
    Ok(match cfg.top {
        TopKind::Brute => Top::Brute(FlatIndex::build(&centroids)?),
        TopKind::KdTree => {
            let t = KdTree::build(&centroids)?;
            report.warnings.extend(t.warnings().iter().cloned());
            Top::KdTree(t)
        }
        TopKind::Pq => {
            let dim = partition.centroids[0].dim();
            let data: Vec<f32> = partition.centroids.iter().flat_map(|c| c.iter().copied()).collect();
            let codebook = PqCodebook::train(&data, dim, &cfg.pq)?;
            report.warnings.extend(codebook.warnings().iter().cloned());
            let codes = codebook.encode_rows(&data)?;
            Top::Pq { codebook, codes }
        }
    })
}

/// Returns the bottom and whether it fell back to a direct scan.
fn build_bottom(
    points: &Points,
    members: &[usize],
    weights: Option<&[f64]>,
    cfg: &TwoLevelConfig,
    subset: usize,
) -> Result<(Bottom, bool)> {
    if members.is_empty() {
        return Ok((Bottom::Empty, false));
    }
    let sub = points.select(members);
    let brute = |sub| Ok((Bottom::Brute(FlatIndex::from_points(sub)?), true));
    match cfg.bottom {
        BottomKind::Brute => Ok((Bottom::Brute(FlatIndex::from_points(sub)?), false)),
        BottomKind::Tree if members.len() <= cfg.tree.max_leaf_size => brute(sub),
        BottomKind::Tree => {
            let w: Option<Vec<f64>> = weights.map(|w| members.iter().map(|&i| w[i]).collect());
            let mut tc = cfg.tree.clone();
            tc.seed = indexed_seed(cfg.tree.seed, subset as u64);
            Ok((Bottom::Tree(QlbTree::build_points(sub, w.as_deref(), &tc)?), false))
        }
        BottomKind::Lsh if members.len() < LSH_MIN_SUBSET => brute(sub),
        BottomKind::Lsh => {
            let mut lc = cfg.lsh.clone();
            lc.seed = indexed_seed(cfg.lsh.seed, subset as u64);
            Ok((Bottom::Lsh(LshIndex::build_points(sub, &lc)?), false))
        }
    }
}

fn bottom_bytes(b: &Bottom) -> Vec<u8> {
    let mut enc = Encoder::new(b"BOTM");
    match b {
        Bottom::Empty => enc.put_u8(0),
        Bottom::Brute(f) => {
            enc.put_u8(1);
            enc.put_bytes(&f.to_bytes());
        }
        Bottom::Tree(t) => {
            enc.put_u8(2);
            enc.put_bytes(&t.to_bytes());
        }
        Bottom::Lsh(l) => {
            enc.put_u8(3);
            enc.put_bytes(&l.to_bytes());
        }
    }
    enc.finish()
}

fn decode_bottom(bytes: &[u8]) -> Result<Bottom> {
    let mut dec = Decoder::new(bytes, b"BOTM")?;
    let b = match dec.u8()? {
        0 => Bottom::Empty,
        1 => Bottom::Brute(FlatIndex::from_bytes(dec.bytes()?)?),
        2 => Bottom::Tree(QlbTree::from_bytes(dec.bytes()?)?),
        3 => Bottom::Lsh(LshIndex::from_bytes(dec.bytes()?)?),
        t => return Err(dec.error(format!("unknown bottom kind {t}"))),
    };
    dec.finish()?;
    Ok(b)
}

impl crate::bench::KnobSearch for TwoLevelIndex {
    /// The knob is `n_probe`.
    fn search_knob(
        &self,
        query: &[f32],
        feature: Option<&[f32]>,
        k: usize,
        knob: usize,
    ) -> Result<(ResultSet, SearchStats)> {
        self.search_with(query, feature, k, knob)
    }
}

#[cfg(test)]
mod tests;
