//! Leaf-budget sweep of a likelihood-boosted tree against a balanced tree on skewed
//! traffic (unbalance score around 0.23).

use edgeann::bench::{probes_to_recall, run_sweep, RecallCost, Variant};
use edgeann::io::{generate_synthetic, simulate_at_score, SyntheticConfig, TrafficSample};
use edgeann::rptree::TreeConfig;
use edgeann::QlbTree;

fn main() -> edgeann::Result<()> {
    let seed = 11;
    let (catalog, _, _) = generate_synthetic(&SyntheticConfig::new(256, 16, 16, seed))?;
    let (_, sim) = simulate_at_score(0.23, 0.02, 256, 10_000, seed)?;
    let noise = std::env::args().nth(1).map_or(0.0, |s| s.parse().expect("noise sigma"));
    let traffic = TrafficSample::from_indices(&catalog, &sim.query_indices, noise, seed)?.with_ground_truth(&catalog, 10)?;

    let balanced = QlbTree::build(&catalog, None, &TreeConfig::balanced(seed))?;
    let boosted = QlbTree::build(&catalog, Some(&sim.profile), &TreeConfig::boosted(seed))?;
    let knobs: Vec<usize> = (1..=16).collect();
    let points = run_sweep(
        &[Variant::new("balanced", &balanced, knobs.clone()), Variant::new("qlbt", &boosted, knobs.clone())],
        &traffic.query_vectors,
        None,
        traffic.ground_truth_ids.as_ref().unwrap(),
        10,
        seed,
    )?;

    println!("variant   leaves  recall@10  mean dist  mean ops");
    for p in &points {
        println!(
            "{:<9} {:>6}  {:>9.3}  {:>9.1}  {:>8.1}",
            p.variant, p.knob, p.recall_at_k, p.mean_distance_computations, p.mean_vector_ops
        );
    }
    let (b, q) = points.split_at(knobs.len());
    if let (RecallCost::Reached { mean_distance_computations: bd, .. }, RecallCost::Reached { mean_distance_computations: qd, .. }) =
        (probes_to_recall(b, 0.95), probes_to_recall(q, 0.95))
    {
        println!("\nat recall 0.95: balanced {bd:.1}, boosted {qd:.1} distance computations ({:+.1}%)", 100.0 * (qd / bd - 1.0));
    }
    Ok(())
}
