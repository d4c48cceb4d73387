//! Runs the two-level comparison on SIFT when the dataset is available locally:
//!
//!     cargo run --release --example sift_subset -- /path/to/sift [num_base]
//!
//! expects sift_base.fvecs, sift_query.fvecs and sift_groundtruth.ivecs in that
//! directory. With `num_base` below 1M the ground truth is recomputed on the subset.

use std::path::PathBuf;

use edgeann::bench::{run_sweep, DistanceBudgeted, Variant};
use edgeann::io::{compute_ground_truth, read_fvecs, read_fvecs_head, read_ivecs};
use edgeann::rptree::TreeConfig;
use edgeann::twolevel::{build_partition, BottomKind, TopKind, TwoLevelConfig, TwoLevelIndex};
use edgeann::{LshConfig, LshIndex, QlbTree};

fn main() -> edgeann::Result<()> {
    let Some(dir) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: sift_subset <sift-dir> [num_base]");
        return Ok(());
    };
    let num_base: usize = std::env::args().nth(2).map_or(1_000_000, |s| s.parse().expect("num_base"));
    let catalog = read_fvecs_head(dir.join("sift_base.fvecs"), num_base)?;
    let queries: Vec<_> = read_fvecs(dir.join("sift_query.fvecs"))?.records().iter().take(1000).map(|r| r.embedding.clone()).collect();
    let truth = if catalog.len() == 1_000_000 {
        read_ivecs(dir.join("sift_groundtruth.ivecs"))?.into_iter().take(queries.len()).collect()
    } else {
        compute_ground_truth(&catalog, &queries, 10)?
    };
    println!("{} base vectors, {} queries", catalog.len(), queries.len());

    let mut cfg = TwoLevelConfig::new((catalog.len() / 100).max(1), 1).with_top(TopKind::Pq);
    cfg.kmeans_sample = Some(catalog.len().min(100_000));
    let partition = build_partition(&catalog, None, &cfg)?;
    let brute = TwoLevelIndex::from_partition(&catalog, partition.clone(), None, &cfg)?;
    let tree_bottom = TwoLevelIndex::from_partition(&catalog, partition.clone(), None, &cfg.clone().with_bottom(BottomKind::Tree))?;
    let lsh_bottom = TwoLevelIndex::from_partition(&catalog, partition, None, &cfg.clone().with_bottom(BottomKind::Lsh))?;
    let tree = QlbTree::build(&catalog, None, &TreeConfig::balanced(2))?;
    let lsh = LshIndex::build(&catalog, &LshConfig { pool_size: 64, num_tables: 8, bits_per_table: 16, seed: 3 })?;

    let np = vec![1, 4, 16, 64];
    let budgeted = DistanceBudgeted(&tree);
    let points = run_sweep(
        &[
            Variant::new("tree", &budgeted, vec![1000, 4000, 16000]),
            Variant::new("lsh", &lsh, vec![0, 1, 2]),
            Variant::new("pq/brute", &brute, np.clone()),
            Variant::new("pq/tree", &tree_bottom, np.clone()),
            Variant::new("pq/lsh", &lsh_bottom, np),
        ],
        &queries,
        None,
        &truth,
        10,
        0,
    )?;
    print!("{}", edgeann::bench::report_csv(&points));
    Ok(())
}
