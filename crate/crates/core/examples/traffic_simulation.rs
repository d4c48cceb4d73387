//! Simulated query traffic: Beta-distributed likelihoods, their unbalance score, and how
//! deep the popular entities sit in a balanced vs a boosted tree.

use edgeann::io::{generate_synthetic, simulate_at_score, simulate_likelihoods, BetaSimConfig, SyntheticConfig};
use edgeann::rptree::TreeConfig;
use edgeann::QlbTree;

fn main() -> edgeann::Result<()> {
    for (alpha, beta) in [(1.0, 1.0), (0.2, 1.0), (0.02, 1.0)] {
        let sim = simulate_likelihoods(&BetaSimConfig { alpha, beta, num_entities: 1000, num_queries: 0, seed: 1 })?;
        println!("Beta({alpha}, {beta}): unbalance score {:.3}", sim.profile.unbalance_score()?);
    }

    let (catalog, _, _) = generate_synthetic(&SyntheticConfig::new(256, 16, 16, 7))?;
    println!("\nscore  balanced  boosted   (expected depth, 256 entities)");
    for target in [0.2, 0.3, 0.4, 0.5] {
        let (_, sim) = simulate_at_score(target, 0.02, 256, 1, 3)?;
        let balanced = QlbTree::build(&catalog, None, &TreeConfig::balanced(3))?;
        let boosted = QlbTree::build(&catalog, Some(&sim.profile), &TreeConfig::boosted(3))?;
        println!(
            "{:.3}  {:>8.3}  {:>7.3}",
            sim.profile.unbalance_score()?,
            balanced.expected_depth(&sim.profile)?,
            boosted.expected_depth(&sim.profile)?
        );
    }
    Ok(())
}
