//! Query-likelihood profiles, Beta-distributed traffic simulation and the entropy-based
//! unbalance score.
//!
//! Text formats are headerless and line-oriented: a profile file holds one probability
//! per line in catalog order; a traffic file holds one queried entity index per line.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{Catalog, EntityId, Vector, LIKELIHOOD_SUM_TOLERANCE};

/// Per-entity query probabilities aligned with catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodProfile {
    probabilities: Vec<f64>,
}

impl LikelihoodProfile {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidInput("empty likelihood profile".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidInput(format!("invalid probability {p}")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > LIKELIHOOD_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(LikelihoodProfile { probabilities })
    }

    /// Normalizes nonnegative weights. Fails when they sum to zero.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidInput(format!("weights sum to {sum}")));
        }
        LikelihoodProfile::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        LikelihoodProfile::from_weights(&vec![1.0; n])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Profile restricted to `indices`, renormalized; uniform if the subset has no mass.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let w: Vec<f64> = indices.iter().map(|&i| self.probabilities[i]).collect();
        LikelihoodProfile::from_weights(&w).or_else(|_| LikelihoodProfile::uniform(indices.len()))
    }

    /// `1 - H(p) / log2(N)`: 0 for uniform traffic, 1 for a point mass.
    pub fn unbalance_score(&self) -> Result<f64> {
        let n = self.probabilities.len();
        if n < 2 {
            return Err(Error::InvalidInput(
                "unbalance score needs at least 2 entities".into(),
            ));
        }
        let entropy: f64 = self
            .probabilities
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum();
        Ok((1.0 - entropy / (n as f64).log2()).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSimConfig {
    pub alpha: f64,
    pub beta: f64,
    pub num_entities: usize,
    pub num_queries: usize,
    pub seed: u64,
}

impl BetaSimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Beta parameters must be positive (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.num_entities < 2 {
            return Err(Error::InvalidConfig("num_entities must be >= 2".into()));
        }
        Ok(())
    }
}

/// Output of [`simulate_likelihoods`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub profile: LikelihoodProfile,
    /// Catalog positions of the sampled queries.
    pub query_indices: Vec<usize>,
}

/// Draws i.i.d. Beta(alpha, beta) weights, normalizes them into a profile and samples
/// `num_queries` entities from it.
pub fn simulate_likelihoods(cfg: &BetaSimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let dist = Beta::new(cfg.alpha, cfg.beta)
        .map_err(|e| Error::InvalidConfig(format!("Beta({}, {}): {e}", cfg.alpha, cfg.beta)))?;
    for attempt in 0..10u64 {
        let mut rng = seed::rng(seed::sub_seed(cfg.seed.wrapping_add(attempt), "likelihood"));
        let weights: Vec<f64> = (0..cfg.num_entities).map(|_| dist.sample(&mut rng)).collect();
        let Ok(profile) = LikelihoodProfile::from_weights(&weights) else {
            continue;
        };
        let query_indices = sample_traffic(&profile, cfg.num_queries, seed::sub_seed(cfg.seed, "traffic"));
        return Ok(Simulation {
            profile,
            query_indices,
        });
    }
    Err(Error::InvalidInput(
        "Beta draws summed to zero in 10 attempts".into(),
    ))
}

/// `n` i.i.d. categorical draws of entity positions.
pub fn sample_traffic(profile: &LikelihoodProfile, n: usize, seed: u64) -> Vec<usize> {
    let dist = WeightedIndex::new(profile.probabilities()).expect("profile has positive mass");
    let mut rng = seed::rng(seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// Beta `beta` parameter used by the score calibration; `alpha` is the free dial.
pub const CALIBRATION_BETA: f64 = 1.0;

const CALIBRATION_DRAWS: u64 = 16;

fn mean_score(alpha: f64, num_entities: usize, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..CALIBRATION_DRAWS {
        let sim = simulate_likelihoods(&BetaSimConfig {
            alpha,
            beta: CALIBRATION_BETA,
            num_entities,
            num_queries: 0,
            seed: seed::indexed_seed(seed, i),
        })?;
        total += sim.profile.unbalance_score()?;
    }
    Ok(total / CALIBRATION_DRAWS as f64)
}

/// Finds the Beta(alpha, 1) `alpha` whose mean realized unbalance score matches `target`.
///
/// The score decreases monotonically in `alpha` for this family, so this is a bisection
/// on `log10(alpha)` over `[-3, 7]`.
pub fn calibrate_alpha(target: f64, num_entities: usize, seed: u64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidInput(format!("target score {target} outside [0, 1)")));
    }
    let (mut lo, mut hi) = (-3.0f64, 7.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mean_score(10f64.powf(mid), num_entities, seed)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(10f64.powf(0.5 * (lo + hi)))
}

/// Simulates a profile whose realized unbalance score lies within `tolerance` of
/// `target`, trying successive sub-seeds of the calibrated configuration.
pub fn simulate_at_score(
    target: f64,
    tolerance: f64,
    num_entities: usize,
    num_queries: usize,
    seed: u64,
) -> Result<(BetaSimConfig, Simulation)> {
    let alpha = calibrate_alpha(target, num_entities, seed::sub_seed(seed, "calibration"))?;
    for attempt in 0..500 {
        let cfg = BetaSimConfig {
            alpha,
            beta: CALIBRATION_BETA,
            num_entities,
            num_queries,
            seed: seed::indexed_seed(seed, attempt),
        };
        let sim = simulate_likelihoods(&cfg)?;
        if (sim.profile.unbalance_score()? - target).abs() <= tolerance {
            return Ok((cfg, sim));
        }
    }
    Err(Error::InvalidInput(format!(
        "no draw within {tolerance} of unbalance score {target}"
    )))
}

/// Query vectors with optional exact ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSample {
    pub query_vectors: Vec<Vector>,
    pub ground_truth_ids: Option<Vec<Vec<EntityId>>>,
}

impl TrafficSample {
    /// Queries are the sampled entities' embeddings, plus isotropic Gaussian noise of
    /// standard deviation `noise_sigma` (0 reproduces the entities exactly).
    pub fn from_indices(
        catalog: &Catalog,
        indices: &[usize],
        noise_sigma: f32,
        seed: u64,
    ) -> Result<Self> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise sigma {noise_sigma} must be >= 0")));
        }
        let mut rng = seed::rng(seed::sub_seed(seed, "query-noise"));
        let normal = Normal::new(0.0f32, noise_sigma.max(f32::MIN_POSITIVE)).unwrap();
        let query_vectors = indices
            .iter()
            .map(|&i| {
                let e = catalog.embedding(i);
                if noise_sigma == 0.0 {
                    Ok(e.clone())
                } else {
                    Vector::new(e.iter().map(|x| x + normal.sample(&mut rng)).collect())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrafficSample {
            query_vectors,
            ground_truth_ids: None,
        })
    }

    pub fn with_ground_truth(mut self, catalog: &Catalog, k: usize) -> Result<Self> {
        self.ground_truth_ids = Some(super::compute_ground_truth(catalog, &self.query_vectors, k)?);
        Ok(self)
    }
}

fn write_lines<T: std::fmt::Display>(values: &[T], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 12);
    for v in values {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_lines<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut offset = 0u64;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            out.push(trimmed.parse::<T>().map_err(|e| Error::Parse {
                offset,
                reason: format!("`{trimmed}`: {e}"),
            })?);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

pub fn write_profile(profile: &LikelihoodProfile, path: impl AsRef<Path>) -> Result<()> {
    write_lines(profile.probabilities(), path.as_ref())
}

pub fn read_profile(path: impl AsRef<Path>) -> Result<LikelihoodProfile> {
    LikelihoodProfile::new(read_lines(path.as_ref())?)
}

pub fn write_traffic(indices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_lines(indices, path.as_ref())
}

pub fn read_traffic(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    read_lines(path.as_ref())
}
