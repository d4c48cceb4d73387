//! Per-candidate split evaluation: likelihood-balanced threshold, count unbalance,
//! projection variance, and the combined projection score.

use crate::error::{Error, Result};

use super::{TreeConfig, TreeMode};

/// A threshold on projected values; entities projecting `<= tau` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub tau: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// Picks the cut minimizing `|mass(alpha <= tau) - mass(alpha > tau)|`.
///
/// Candidate cuts are midpoints between consecutive distinct sorted projections, so both
/// sides are always nonempty. Objective ties (within `1e-12` of the total mass) go to the
/// cut with the smaller count difference, then to the smaller `tau`.
pub fn balanced_threshold(projections: &[f64], likelihoods: &[f64]) -> Result<Threshold> {
    if projections.len() != likelihoods.len() {
        return Err(Error::InvalidInput(format!(
            "{} projections but {} likelihoods",
            projections.len(),
            likelihoods.len()
        )));
    }
    let m = projections.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least 2 projected values".into()));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| projections[a].total_cmp(&projections[b]));

    let total: f64 = likelihoods.iter().sum();
    let unit = !(total > 0.0);
    let weight = |j: usize| if unit { 1.0 } else { likelihoods[j] };
    let total = if unit { m as f64 } else { total };
    let eps = 1e-12 * total;

    let mut best: Option<(f64, usize, Threshold)> = None;
    let mut left_mass = 0.0;
    for c in 0..m - 1 {
        left_mass += weight(order[c]);
        let lo = projections[order[c]];
        let hi = projections[order[c + 1]];
        if lo >= hi {
            continue;
        }
        let mut tau = 0.5 * (lo + hi);
        if !(lo <= tau && tau < hi) {
            tau = lo;
        }
        let n_left = c + 1;
        let n_right = m - n_left;
        let diff = (2.0 * left_mass - total).abs();
        let imbalance = n_left.abs_diff(n_right);
        let better = match &best {
            None => true,
            Some((bd, bi, _)) => diff < bd - eps || (diff <= bd + eps && imbalance < *bi),
        };
        if better {
            best = Some((diff, imbalance, Threshold { tau, n_left, n_right }));
        }
    }
    best.map(|(_, _, t)| t).ok_or(Error::DegenerateSplit)
}

/// `max(n_left / n_right, n_right / n_left)`; 1 for a perfectly even split.
pub fn unbalance_factor(n_left: usize, n_right: usize) -> f64 {
    debug_assert!(n_left >= 1 && n_right >= 1);
    let (l, r) = (n_left as f64, n_right as f64);
    (l / r).max(r / l)
}

/// Population variance (divides by `m`), computed in two passes.
pub fn projection_variance(projections: &[f64]) -> Result<f64> {
    let m = projections.len();
    if m < 2 {
        return Err(Error::InvalidInput("variance needs at least 2 values".into()));
    }
    let mean = projections.iter().sum::<f64>() / m as f64;
    Ok(projections.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / m as f64)
}

/// Projection score. Boosted nodes at depth `<= boost_depth` blend variance with the
/// count unbalance; everywhere else the score is the variance alone.
pub fn split_score(variance: f64, unbalance: f64, depth: usize, cfg: &TreeConfig) -> f64 {
    if cfg.mode == TreeMode::Boosted && depth <= cfg.boost_depth {
        cfg.lambda * variance + (1.0 - cfg.lambda) * unbalance
    } else {
        variance
    }
}

/// Min-max scaling across the candidates of one node; constant inputs map to 0.
pub(crate) fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    values
        .iter()
        .map(|v| if range > 0.0 { (v - lo) / range } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_examples() {
        let t = balanced_threshold(&[1.0, 2.0, 3.0, 4.0], &[0.25; 4]).unwrap();
        assert_eq!(t, Threshold { tau: 2.5, n_left: 2, n_right: 2 });

        // cut 1.5 -> |0.7-0.3| = 0.4, cut 2.5 -> 0.6, cut 3.5 -> 0.8
        let t = balanced_threshold(&[1.0, 2.0, 3.0, 4.0], &[0.7, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(t, Threshold { tau: 1.5, n_left: 1, n_right: 3 });

        assert!(matches!(
            balanced_threshold(&[5.0, 5.0, 5.0], &[1.0; 3]),
            Err(Error::DegenerateSplit)
        ));
    }

    #[test]
    fn threshold_ties_prefer_even_counts_then_smaller_tau() {
        // every cut has mass difference 0; the 2/2 split wins on counts
        let t = balanced_threshold(&[1.0, 2.0, 3.0, 4.0], &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(t, Threshold { tau: 2.5, n_left: 2, n_right: 2 });
        // equal mass difference and equal count imbalance: smaller tau wins
        let t = balanced_threshold(&[1.0, 2.0, 3.0], &[0.5, 0.0, 0.5]).unwrap();
        assert_eq!(t, Threshold { tau: 1.5, n_left: 1, n_right: 2 });
        let t = balanced_threshold(&[3.0, 1.0, 2.0], &[1.0; 3]).unwrap();
        assert_eq!(t, Threshold { tau: 1.5, n_left: 1, n_right: 2 });
    }

    #[test]
    fn threshold_skips_duplicate_values() {
        let t = balanced_threshold(&[1.0, 1.0, 1.0, 2.0], &[1.0; 4]).unwrap();
        assert_eq!(t, Threshold { tau: 1.5, n_left: 3, n_right: 1 });
    }

    #[test]
    fn unbalance_examples() {
        assert_eq!(unbalance_factor(2, 2), 1.0);
        assert_eq!(unbalance_factor(1, 3), 3.0);
        assert_eq!(unbalance_factor(7, 3), 7.0 / 3.0);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(projection_variance(&[4.0; 5]).unwrap(), 0.0);
        assert_eq!(projection_variance(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(projection_variance(&[1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        // Welford as the independent route
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        assert!((projection_variance(&xs).unwrap() - m2 / xs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let mut cfg = TreeConfig::boosted(0);
        cfg.lambda = 1.0;
        assert_eq!(split_score(0.3, 0.9, 0, &cfg), 0.3);
        cfg.lambda = 0.5;
        assert_eq!(split_score(0.3, 0.9, cfg.boost_depth + 1, &cfg), 0.3);
        assert_eq!(split_score(0.2, 0.8, 1, &cfg), 0.5);
        let balanced = TreeConfig::balanced(0);
        assert_eq!(split_score(0.2, 0.8, 1, &balanced), 0.2);
    }

    #[test]
    fn min_max_scaling() {
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}
