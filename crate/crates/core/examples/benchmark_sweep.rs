//! Recall/cost sweep over flat, tree and LSH indexes, written as report.csv and
//! summary.json into the directory given as the first argument (default `bench-out`).

use std::path::PathBuf;

use edgeann::bench::{run_sweep, write_report, Gates, Variant};
use edgeann::io::{compute_ground_truth, generate_synthetic, SyntheticConfig};
use edgeann::rptree::TreeConfig;
use edgeann::{FlatIndex, LshConfig, LshIndex, QlbTree};

fn main() -> edgeann::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bench-out".into()));
    let (catalog, mixture, _) = generate_synthetic(&SyntheticConfig::new(10_000, 24, 60, 4))?;
    let queries = mixture.sample_queries(500, 5);
    let truth = compute_ground_truth(&catalog, &queries, 10)?;

    let flat = FlatIndex::build(&catalog)?;
    let tree = QlbTree::build(&catalog, None, &TreeConfig::balanced(6))?;
    let lsh = LshIndex::build(&catalog, &LshConfig::with_seed(7))?;
    let points = run_sweep(
        &[
            Variant::new("flat", &flat, vec![1]),
            Variant::new("tree", &tree, vec![1, 2, 4, 8, 16, 32]),
            Variant::new("lsh", &lsh, vec![0, 1, 2]),
        ],
        &queries,
        None,
        &truth,
        10,
        0,
    )?;
    let summary = write_report(&out, &points, Gates::on_device())?;
    print!("{}", edgeann::bench::report_csv(&points));
    println!("any point within gates: {} (report in {})", summary.any_pass, out.display());
    Ok(())
}
