use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::seed;
use crate::types::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by at most this fraction.
    pub tolerance: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iters: 25,
            tolerance: 1e-6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Centroids plus a total assignment of input rows to subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub centroids: Vec<Vector>,
    /// Subset index of each input row.
    pub assignments: Vec<usize>,
    /// Rows of each subset, ascending.
    pub subset_members: Vec<Vec<usize>>,
}

impl Partition {
    pub fn from_assignments(centroids: Vec<Vector>, assignments: Vec<usize>) -> Result<Self> {
        let k = centroids.len();
        let mut subset_members = vec![Vec::new(); k];
        for (row, &a) in assignments.iter().enumerate() {
            if a >= k {
                return Err(Error::InvalidInput(format!("assignment {a} >= {k} subsets")));
            }
            subset_members[a].push(row);
        }
        Ok(Partition {
            centroids,
            assignments,
            subset_members,
        })
    }

    pub fn num_subsets(&self) -> usize {
        self.centroids.len()
    }

    pub fn subset_sizes(&self) -> Vec<usize> {
        self.subset_members.iter().map(Vec::len).collect()
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        let dim = self.centroids.first().map_or(0, |c| c.dim());
        enc.put_u32(dim as u32);
        enc.put_u32(self.centroids.len() as u32);
        for c in &self.centroids {
            for &x in c.iter() {
                enc.put_f32(x);
            }
        }
        let a: Vec<u32> = self.assignments.iter().map(|&a| a as u32).collect();
        enc.put_u32_slice(&a);
    }

    pub(crate) fn decode(dec: &mut Decoder) -> Result<Self> {
        let dim = dec.u32()? as usize;
        let k = dec.u32()? as usize;
        let centroids = (0..k)
            .map(|_| Vector::new(dec.f32_array(dim)?))
            .collect::<Result<Vec<_>>>()?;
        let assignments = dec.u32_vec()?.into_iter().map(|a| a as usize).collect();
        Partition::from_assignments(centroids, assignments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub partition: Partition,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    /// Objective after each assignment step.
    pub history: Vec<f64>,
}

#[inline]
fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xs = x.chunks_exact(4);
    let cs = c.chunks_exact(4);
    let (rx, rc) = (xs.remainder(), cs.remainder());
    for (a, b) in xs.zip(cs) {
        for l in 0..4 {
            let d = a[l] as f64 - b[l];
            acc[l] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (a, b) in rx.iter().zip(rc) {
        let d = *a as f64 - b;
        s += d * d;
    }
    s
}

fn nearest(x: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeding over row-major `data`.
///
/// A cluster left empty by an assignment step takes the point farthest from its own
/// centroid (drawn from clusters with more than one member), so exactly `k` nonempty
/// subsets come out.
pub fn kmeans(data: &[f32], dim: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::InvalidInput(format!(
            "{} floats do not form rows of dim {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if n < cfg.k {
        return Err(Error::InvalidInput(format!(
            "{n} vectors cannot form {} clusters",
            cfg.k
        )));
    }
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let k = cfg.k;
    let mut rng = seed::rng(cfg.seed);

    // k-means++ seeding
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend(row(first).iter().map(|&x| x as f64));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(&mut rng),
            Err(_) => rng.random_range(0..n),
        };
        let start = centroids.len();
        centroids.extend(row(next).iter().map(|&x| x as f64));
        let c = &centroids[start..];
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(sq_dist(row(i), c));
        });
    }

    let mut assignments = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut history: Vec<f64> = Vec::new();
    for iter in 0..cfg.max_iters.max(1) {
        assignments
            .par_iter_mut()
            .zip(dists.par_iter_mut())
            .enumerate()
            .for_each(|(i, (a, d))| {
                let (j, dist) = nearest(row(i), &centroids, dim);
                *a = j;
                *d = dist;
            });

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut far = None;
            for i in 0..n {
                if counts[assignments[i]] > 1 && far.is_none_or(|f: usize| dists[i] > dists[f]) {
                    far = Some(i);
                }
            }
            let p = far.expect("n >= k leaves a cluster with two members");
            counts[assignments[p]] -= 1;
            counts[empty] = 1;
            assignments[p] = empty;
            dists[p] = 0.0;
            for (c, &x) in centroids[empty * dim..(empty + 1) * dim].iter_mut().zip(row(p)) {
                *c = x as f64;
            }
        }

        let objective: f64 = dists.iter().sum();
        if let Some(&prev) = history.last() {
            debug_assert!(
                objective <= prev * (1.0 + 1e-9) + 1e-12,
                "k-means objective rose from {prev} to {objective}"
            );
        }
        history.push(objective);
        let converged = history.len() >= 2 && {
            let prev = history[history.len() - 2];
            prev - objective <= cfg.tolerance * prev
        };
        if converged || iter + 1 == cfg.max_iters.max(1) {
            break;
        }

        let mut sums = vec![0.0f64; k * dim];
        for (i, &a) in assignments.iter().enumerate() {
            for (s, &x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += x as f64;
            }
        }
        for j in 0..k {
            let inv = 1.0 / counts[j] as f64;
            for (c, s) in centroids[j * dim..(j + 1) * dim]
                .iter_mut()
                .zip(&sums[j * dim..(j + 1) * dim])
            {
                *c = s * inv;
            }
        }
    }

    let objective = *history.last().unwrap();
    let centroid_vectors = centroids
        .chunks_exact(dim)
        .map(|c| Vector::new(c.iter().map(|&x| x as f32).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(KMeansResult {
        partition: Partition::from_assignments(centroid_vectors, assignments)?,
        objective,
        history,
    })
}

/// Index of the nearest centroid for every row of `data`, ties to the lower index.
pub fn assign_nearest(data: &[f32], dim: usize, centroids: &[Vector]) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::InvalidInput("no centroids".into()));
    }
    for c in centroids {
        Error::check_dim(dim, c.dim())?;
    }
    let flat: Vec<f64> = centroids.iter().flat_map(|c| c.iter().map(|&x| x as f64)).collect();
    Ok(data
        .par_chunks_exact(dim)
        .map(|row| nearest(row, &flat, dim).0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_rows;

    fn flatten(rows: &[Vec<f32>]) -> Vec<f32> {
        rows.concat()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let rows = random_rows(50, 3, 1);
        let r = kmeans(&flatten(&rows), 3, &KMeansConfig::new(1, 0)).unwrap();
        let mut total = 0.0;
        for d in 0..3 {
            let mean = rows.iter().map(|r| r[d] as f64).sum::<f64>() / 50.0;
            assert!((r.partition.centroids[0][d] as f64 - mean).abs() < 1e-6);
            total += rows.iter().map(|r| (r[d] as f64 - mean).powi(2)).sum::<f64>();
        }
        assert!((r.objective - total).abs() < 1e-9 * total);
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let rows = random_rows(12, 4, 2);
        let r = kmeans(&flatten(&rows), 4, &KMeansConfig::new(12, 3)).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.partition.subset_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn separated_blobs_are_recovered() {
        for seed in 0..10 {
            let mut rng = seed::rng(seed + 100);
            let mut data = Vec::new();
            for i in 0..100 {
                let c = if i < 50 { 0.0 } else { 10.0 };
                data.push(c + rng.random_range(-1.0f32..1.0));
                data.push(c + rng.random_range(-1.0f32..1.0));
            }
            let r = kmeans(&data, 2, &KMeansConfig::new(2, seed)).unwrap();
            let a = &r.partition.assignments;
            assert!(a[..50].iter().all(|&x| x == a[0]));
            assert!(a[50..].iter().all(|&x| x == a[50]));
            assert_ne!(a[0], a[50]);
        }
    }

    #[test]
    fn objective_never_increases_and_partition_covers() {
        let rows = random_rows(500, 6, 4);
        let r = kmeans(&flatten(&rows), 6, &KMeansConfig::new(17, 5)).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        assert_eq!(r.partition.subset_sizes().iter().sum::<usize>(), 500);
        assert!(r.partition.subset_sizes().iter().all(|&s| s > 0));
        let mut all: Vec<usize> = r.partition.subset_members.concat();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let data = vec![1.0f32; 2 * 10];
        let r = kmeans(&data, 2, &KMeansConfig::new(4, 0)).unwrap();
        assert!(r.partition.subset_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn too_few_vectors_rejected() {
        assert!(kmeans(&[1.0, 2.0], 1, &KMeansConfig::new(3, 0)).is_err());
        assert!(kmeans(&[1.0, 2.0, 3.0], 2, &KMeansConfig::new(1, 0)).is_err());
    }
}
