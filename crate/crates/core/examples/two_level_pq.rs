//! Two-level search on 100K entities: k-means partition into ~100-entity subsets, a PQ
//! top over the centroids, and brute, tree or LSH bottoms sharing one partition.

use edgeann::bench::{run_sweep, Variant};
use edgeann::io::{compute_ground_truth, generate_synthetic, SyntheticConfig};
use edgeann::twolevel::{build_partition, BottomKind, TopKind, TwoLevelConfig, TwoLevelIndex};

fn main() -> edgeann::Result<()> {
    let n = std::env::args().nth(1).map_or(100_000, |s| s.parse().expect("catalog size"));
    let (catalog, mixture, _) = generate_synthetic(&SyntheticConfig::new(n, 32, n / 100, 1).with_spread(0.25))?;
    let queries = mixture.sample_queries(300, 2);
    let truth = compute_ground_truth(&catalog, &queries, 10)?;

    let mut cfg = TwoLevelConfig::new(n / 100, 3).with_top(TopKind::Pq);
    cfg.kmeans_iters = 15;
    cfg.kmeans_sample = Some(n / 4);
    let partition = build_partition(&catalog, None, &cfg)?;

    let mut indexes = Vec::new();
    for bottom in [BottomKind::Brute, BottomKind::Tree, BottomKind::Lsh] {
        let index = TwoLevelIndex::from_partition(&catalog, partition.clone(), None, &cfg.clone().with_bottom(bottom))?;
        let f = index.footprint();
        println!("{bottom:?}: {} bytes (top {}, bottoms {}), {} fallbacks", f.total, f.top, f.bottoms.iter().sum::<usize>(), index.build_report().brute_fallbacks.len());
        indexes.push((format!("pq/{bottom:?}"), index));
    }

    let variants: Vec<Variant> = indexes.iter().map(|(name, i)| Variant::new(name.clone(), i, vec![1, 4, 16, 64])).collect();
    let points = run_sweep(&variants, &queries, None, &truth, 10, 0)?;
    println!("\nvariant      n_probe  recall@10  p90 dist");
    for p in &points {
        println!("{:<12} {:>7}  {:>9.3}  {:>8}", p.variant, p.knob, p.recall_at_k, p.p90_distance_computations);
    }
    Ok(())
}
