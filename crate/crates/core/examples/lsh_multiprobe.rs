//! Hyperplane LSH with multiprobe: recall and candidate count as the Hamming radius grows.

use edgeann::bench::{run_sweep, Variant};
use edgeann::io::{compute_ground_truth, generate_synthetic, SyntheticConfig};
use edgeann::{LshConfig, LshIndex};

fn main() -> edgeann::Result<()> {
    let (catalog, mixture, _) = generate_synthetic(&SyntheticConfig::new(20_000, 32, 100, 1).with_spread(0.2))?;
    let queries = mixture.sample_queries(300, 2);
    let truth = compute_ground_truth(&catalog, &queries, 10)?;

    let cfg = LshConfig { pool_size: 48, num_tables: 6, bits_per_table: 12, seed: 3 };
    let index = LshIndex::build(&catalog, &cfg)?;
    println!("{} projection floats stored", index.projection_floats());

    let points = run_sweep(&[Variant::new("lsh", &index, (0..=4).collect())], &queries, None, &truth, 10, 0)?;
    println!("radius  recall@10  p90 dist  mean dist");
    for p in &points {
        println!("{:>6}  {:>9.3}  {:>8}  {:>9.0}", p.knob, p.recall_at_k, p.p90_distance_computations, p.mean_distance_computations);
    }
    Ok(())
}
