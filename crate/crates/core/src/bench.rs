//! Measurement harness: recall@k, nearest-rank percentiles, knob sweeps and reports.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat::FlatIndex;
use crate::lsh::LshIndex;
use crate::result::{ResultSet, SearchStats};
use crate::rptree::{ProbeBudget, QlbTree};
use crate::types::{EntityId, Vector};

pub use crate::io::sample_traffic;

/// Fraction of queries whose true entity (the first ground-truth id) is among the first
/// `k` results.
pub fn recall_at_k(results: &[ResultSet], ground_truth: &[Vec<EntityId>], k: usize) -> Result<f64> {
    if results.len() != ground_truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} results for {} ground-truth rows",
            results.len(),
            ground_truth.len()
        )));
    }
    if results.is_empty() {
        return Err(Error::InvalidInput("recall over no queries".into()));
    }
    let mut hits = 0usize;
    for (r, truth) in results.iter().zip(ground_truth) {
        let Some(&t) = truth.first() else {
            return Err(Error::InvalidInput("empty ground-truth row".into()));
        };
        if r.neighbors().iter().take(k).any(|n| n.id == t) {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest sample.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("percentile of no samples".into()));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidInput(format!("percentile {p} outside (0, 100]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut vx, mut vy) = (0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}

/// An index searchable at a single integer knob: probe budget, radius or `n_probe`.
pub trait KnobSearch: Sync {
    fn search_knob(
        &self,
        query: &[f32],
        feature: Option<&[f32]>,
        k: usize,
        knob: usize,
    ) -> Result<(ResultSet, SearchStats)>;
}

impl KnobSearch for FlatIndex {
    fn search_knob(&self, q: &[f32], _: Option<&[f32]>, k: usize, _: usize) -> Result<(ResultSet, SearchStats)> {
        self.search(q, k)
    }
}

/// The knob is a leaf budget.
impl KnobSearch for QlbTree {
    fn search_knob(&self, q: &[f32], _: Option<&[f32]>, k: usize, knob: usize) -> Result<(ResultSet, SearchStats)> {
        self.search(q, k, ProbeBudget::Leaves(knob))
    }
}

/// The knob is the multiprobe radius.
impl KnobSearch for LshIndex {
    fn search_knob(&self, q: &[f32], _: Option<&[f32]>, k: usize, knob: usize) -> Result<(ResultSet, SearchStats)> {
        self.search(q, k, knob)
    }
}

/// Searches a tree under a distance-computation budget instead of a leaf budget.
pub struct DistanceBudgeted<'a>(pub &'a QlbTree);

impl KnobSearch for DistanceBudgeted<'_> {
    fn search_knob(&self, q: &[f32], _: Option<&[f32]>, k: usize, knob: usize) -> Result<(ResultSet, SearchStats)> {
        self.0.search(q, k, ProbeBudget::DistanceComputations(knob))
    }
}

/// Per-query outcomes of one variant at one knob value.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub variant: String,
    pub knob: usize,
    pub results: Vec<ResultSet>,
    pub stats: Vec<SearchStats>,
    pub seed: u64,
}

impl BenchRun {
    pub fn execute(
        variant: &str,
        index: &dyn KnobSearch,
        knob: usize,
        queries: &[Vector],
        features: Option<&[Vector]>,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        if let Some(f) = features {
            if f.len() != queries.len() {
                return Err(Error::InvalidInput("query features not aligned with queries".into()));
            }
        }
        let out: Vec<(ResultSet, SearchStats)> = queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| index.search_knob(q, features.map(|f| f[i].as_slice()), k, knob))
            .collect::<Result<_>>()?;
        let (results, stats) = out.into_iter().unzip();
        Ok(BenchRun {
            variant: variant.to_string(),
            knob,
            results,
            stats,
            seed,
        })
    }

    pub fn curve_point(&self, ground_truth: &[Vec<EntityId>], k: usize) -> Result<CurvePoint> {
        let recall = recall_at_k(&self.results, ground_truth, k)?;
        let dist: Vec<f64> = self.stats.iter().map(|s| s.distance_computations as f64).collect();
        let wall: Vec<f64> = self.stats.iter().map(|s| s.wall_time.as_secs_f64()).collect();
        let n = self.stats.len() as f64;
        Ok(CurvePoint {
            variant: self.variant.clone(),
            knob: self.knob,
            recall_at_k: recall,
            p90_wall_time: Duration::from_secs_f64(percentile(&wall, 90.0)?),
            p90_distance_computations: percentile(&dist, 90.0)? as u64,
            mean_distance_computations: dist.iter().sum::<f64>() / n,
            mean_vector_ops: self.stats.iter().map(|s| s.vector_ops() as f64).sum::<f64>() / n,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub variant: String,
    pub knob: usize,
    pub recall_at_k: f64,
    #[serde(with = "millis")]
    pub p90_wall_time: Duration,
    pub p90_distance_computations: u64,
    pub mean_distance_computations: f64,
    /// Distance computations plus hyperplane projections.
    pub mean_vector_ops: f64,
    pub seed: u64,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?.max(0.0) / 1e3))
    }
}

/// One index under test with the knob values to sweep.
pub struct Variant<'a> {
    pub name: String,
    pub index: &'a dyn KnobSearch,
    pub knobs: Vec<usize>,
}

impl<'a> Variant<'a> {
    pub fn new(name: impl Into<String>, index: &'a dyn KnobSearch, knobs: Vec<usize>) -> Self {
        Variant {
            name: name.into(),
            index,
            knobs,
        }
    }
}

/// One curve point per (variant, knob), in the order given.
pub fn run_sweep(
    variants: &[Variant<'_>],
    queries: &[Vector],
    features: Option<&[Vector]>,
    ground_truth: &[Vec<EntityId>],
    k: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    for v in variants {
        for &knob in &v.knobs {
            let run = BenchRun::execute(&v.name, v.index, knob, queries, features, k, seed)?;
            points.push(run.curve_point(ground_truth, k)?);
        }
    }
    Ok(points)
}

/// Outcome of looking up the cost of a recall target on one variant's curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecallCost {
    Reached {
        /// Smallest knob whose recall meets the target.
        knob: usize,
        /// P90 distance computations, interpolated linearly in recall.
        p90_distance_computations: f64,
        mean_distance_computations: f64,
        mean_vector_ops: f64,
    },
    NotReached,
}

/// Cost of reaching `target` recall on a curve ordered by increasing knob.
pub fn probes_to_recall(curve: &[CurvePoint], target: f64) -> RecallCost {
    let Some(i) = curve.iter().position(|p| p.recall_at_k >= target) else {
        return RecallCost::NotReached;
    };
    let hit = &curve[i];
    let lerp = |f: fn(&CurvePoint) -> f64| {
        if i == 0 {
            return f(hit);
        }
        let prev = &curve[i - 1];
        let span = hit.recall_at_k - prev.recall_at_k;
        let t = if span > 0.0 {
            ((target - prev.recall_at_k) / span).clamp(0.0, 1.0)
        } else {
            1.0
        };
        f(prev) + t * (f(hit) - f(prev))
    };
    RecallCost::Reached {
        knob: hit.knob,
        p90_distance_computations: lerp(|p| p.p90_distance_computations as f64),
        mean_distance_computations: lerp(|p| p.mean_distance_computations),
        mean_vector_ops: lerp(|p| p.mean_vector_ops),
    }
}

/// Informational pass/fail thresholds applied to each curve point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub max_p90_wall_ms: f64,
    pub min_recall: f64,
}

impl Gates {
    /// 80 ms P90 search time and recall@10 above 0.80.
    pub fn on_device() -> Self {
        Gates {
            max_p90_wall_ms: 80.0,
            min_recall: 0.80,
        }
    }

    pub fn passes(&self, p: &CurvePoint) -> bool {
        p.p90_wall_time.as_secs_f64() * 1e3 < self.max_p90_wall_ms && p.recall_at_k > self.min_recall
    }
}

pub const CSV_HEADER: &str = "variant,knob,recall_at_k,p90_wall_ms,p90_dist_comps,mean_dist_comps,seed";

/// Comma-separated report, one row per curve point.
pub fn report_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{},{:.3},{}",
            p.variant,
            p.knob,
            p.recall_at_k,
            p.p90_wall_time.as_secs_f64() * 1e3,
            p.p90_distance_computations,
            p.mean_distance_computations,
            p.seed
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedPoint {
    pub variant: String,
    pub knob: usize,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub points: usize,
    pub variants: Vec<String>,
    pub gates: Gates,
    pub gate_results: Vec<GatedPoint>,
    /// True when at least one point meets every gate.
    pub any_pass: bool,
}

pub fn report_summary(points: &[CurvePoint], gates: Gates) -> ReportSummary {
    let mut variants: Vec<String> = Vec::new();
    for p in points {
        if !variants.contains(&p.variant) {
            variants.push(p.variant.clone());
        }
    }
    let gate_results: Vec<GatedPoint> = points
        .iter()
        .map(|p| GatedPoint {
            variant: p.variant.clone(),
            knob: p.knob,
            passes: gates.passes(p),
        })
        .collect();
    ReportSummary {
        points: points.len(),
        variants,
        gates,
        any_pass: gate_results.iter().any(|g| g.passes),
        gate_results,
    }
}

/// Writes `report.csv` and `summary.json` into `dir`.
pub fn write_report(dir: &Path, points: &[CurvePoint], gates: Gates) -> Result<ReportSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("report.csv");
    std::fs::write(&csv, report_csv(points)).map_err(|e| Error::io(&csv, e))?;
    let summary = report_summary(points, gates);
    let json = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(summary)
}

/// Parses a report produced by [`report_csv`]. Wall time and mean vector ops are not
/// round-tripped beyond the CSV precision.
pub fn parse_report_csv(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Format("missing report header".into()));
    }
    let bad = |line: &str| Error::Format(format!("malformed report row: {line}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(line));
            Ok(CurvePoint {
                variant: f[0].to_string(),
                knob: int(f[1])? as usize,
                recall_at_k: num(f[2])?,
                p90_wall_time: Duration::from_secs_f64(num(f[3])?.max(0.0) / 1e3),
                p90_distance_computations: int(f[4])?,
                mean_distance_computations: num(f[5])?,
                mean_vector_ops: f64::NAN,
                seed: int(f[6])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::result::Neighbor;
    use crate::testutil::random_catalog;

    fn rs(ids: &[EntityId]) -> ResultSet {
        ResultSet::from_neighbors(
            ids.iter()
                .enumerate()
                .map(|(i, &id)| Neighbor { id, distance: i as f64 })
                .collect(),
            ids.len(),
        )
    }

    #[test]
    fn recall_examples() {
        let truth: Vec<Vec<EntityId>> = (0..10).map(|i| vec![i]).collect();
        let same: Vec<ResultSet> = (0..10).map(|i| rs(&[i, 100])).collect();
        assert_eq!(recall_at_k(&same, &truth, 10).unwrap(), 1.0);
        let none: Vec<ResultSet> = (0..10).map(|_| rs(&[100, 101])).collect();
        assert_eq!(recall_at_k(&none, &truth, 10).unwrap(), 0.0);
        let seven: Vec<ResultSet> = (0..10)
            .map(|i| if i < 7 { rs(&[50, i]) } else { rs(&[50]) })
            .collect();
        assert!((recall_at_k(&seven, &truth, 10).unwrap() - 0.7).abs() < 1e-12);
        // the hit must fall inside the first k
        assert_eq!(recall_at_k(&seven, &truth, 1).unwrap(), 0.0);
        assert!(recall_at_k(&seven[..3], &truth, 10).is_err());
    }

    #[test]
    fn recall_is_permutation_invariant() {
        let truth: Vec<Vec<EntityId>> = (0..6).map(|i| vec![i, 99]).collect();
        let res: Vec<ResultSet> = (0..6).map(|i| rs(&[7, i * (i % 2), 8])).collect();
        let base = recall_at_k(&res, &truth, 3).unwrap();
        let order = [5, 2, 0, 4, 1, 3];
        let r2: Vec<_> = order.iter().map(|&i| res[i].clone()).collect();
        let t2: Vec<_> = order.iter().map(|&i| truth[i].clone()).collect();
        assert_eq!(recall_at_k(&r2, &t2, 3).unwrap(), base);
    }

    #[test]
    fn percentile_examples_and_exhaustive_check() {
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&ten, 90.0).unwrap(), 9.0);
        assert_eq!(percentile(&ten, 100.0).unwrap(), 10.0);
        assert_eq!(percentile(&[4.5], 1.0).unwrap(), 4.5);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&ten, 0.0).is_err());
        for n in 1..=1000usize {
            let samples: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
            for p in [1.0, 50.0, 90.0, 99.0, 100.0] {
                // sorted samples are 0..n, so the rank-r sample is r - 1
                let mut rank = 0;
                while (rank as f64) < p / 100.0 * n as f64 {
                    rank += 1;
                }
                assert_eq!(percentile(&samples, p).unwrap(), (rank.max(1) - 1) as f64);
            }
        }
    }

    #[test]
    fn spearman_reference_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[2.0, 4.0, 6.0, 8.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // d = (0, 0, 1, -1, 0): 1 - 6*2/(5*24) = 0.9
        assert!((spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]) - 0.9).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 5]), 0.0);
    }

    fn point(knob: usize, recall: f64, cost: f64) -> CurvePoint {
        CurvePoint {
            variant: "v".into(),
            knob,
            recall_at_k: recall,
            p90_wall_time: Duration::ZERO,
            p90_distance_computations: cost as u64,
            mean_distance_computations: cost,
            mean_vector_ops: cost,
            seed: 0,
        }
    }

    #[test]
    fn probes_to_recall_examples() {
        let curve = vec![
            point(1, 0.5, 10.0),
            point(2, 0.8, 20.0),
            point(4, 0.9, 40.0),
            point(8, 1.0, 80.0),
        ];
        match probes_to_recall(&curve, 0.0) {
            RecallCost::Reached { knob, mean_distance_computations, .. } => {
                assert_eq!(knob, 1);
                assert_eq!(mean_distance_computations, 10.0);
            }
            RecallCost::NotReached => panic!(),
        }
        match probes_to_recall(&curve, 0.95) {
            RecallCost::Reached { knob, mean_distance_computations, p90_distance_computations, .. } => {
                assert_eq!(knob, 8);
                assert!((mean_distance_computations - 60.0).abs() < 1e-9);
                assert!((p90_distance_computations - 60.0).abs() < 1e-9);
            }
            RecallCost::NotReached => panic!(),
        }
        assert_eq!(probes_to_recall(&curve[..3], 0.95), RecallCost::NotReached);
    }

    #[test]
    fn sweep_report_round_trip_and_determinism() {
        let cat = random_catalog(300, 8, 1);
        let flat = FlatIndex::build(&cat).unwrap();
        let tree = QlbTree::build(&cat, None, &crate::rptree::TreeConfig::balanced(2)).unwrap();
        let queries: Vec<Vector> = random_catalog(40, 8, 3)
            .records()
            .iter()
            .map(|r| r.embedding.clone())
            .collect();
        let truth = crate::io::compute_ground_truth(&cat, &queries, 10).unwrap();
        let variants = [
            Variant::new("flat", &flat, vec![1]),
            Variant::new("tree", &tree, vec![1, 4, 1000]),
        ];
        let a = run_sweep(&variants, &queries, None, &truth, 10, 5).unwrap();
        let b = run_sweep(&variants, &queries, None, &truth, 10, 5).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].recall_at_k, 1.0);
        assert_eq!(a[3].recall_at_k, 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.recall_at_k, y.recall_at_k);
            assert_eq!(x.mean_distance_computations, y.mean_distance_computations);
        }
        let csv = report_csv(&a);
        let back = parse_report_csv(&csv).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[2].knob, 4);
        assert_eq!(back[1].recall_at_k, (a[1].recall_at_k * 1e6).round() / 1e6);
        let dir = tempfile::tempdir().unwrap();
        let summary = write_report(dir.path(), &a, Gates::on_device()).unwrap();
        assert_eq!(summary.variants, vec!["flat", "tree"]);
        assert!(dir.path().join("report.csv").exists());
    }
}
