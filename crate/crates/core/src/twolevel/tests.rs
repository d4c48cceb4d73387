use proptest::prelude::*;

use super::*;
use crate::io::{generate_synthetic, simulate_likelihoods, BetaSimConfig, SyntheticConfig};
use crate::rptree::{ProbeBudget, TreeConfig};
use crate::testutil::{quadratic_oracle, random_catalog};

fn queries(n: usize, dim: usize, seed: u64) -> Vec<Vector> {
    random_catalog(n, dim, seed).records().iter().map(|r| r.embedding.clone()).collect()
}

#[test]
fn exhaustive_brute_composition_is_exact() {
    for (top, seed) in [(TopKind::Brute, 1), (TopKind::KdTree, 2), (TopKind::Pq, 3)] {
        let cat = random_catalog(400, 6, seed);
        let cfg = TwoLevelConfig::new(20, seed).with_top(top).with_n_probe(20);
        let idx = build_two_level(&cat, None, None, &cfg).unwrap();
        for q in queries(20, 6, 50 + seed) {
            let (res, _) = idx.search(&q, None, 10).unwrap();
            assert_eq!(res.ids(), quadratic_oracle(&cat, &q, 10));
        }
    }
}

#[test]
fn single_subset_equals_bottom_method() {
    let cat = random_catalog(300, 8, 4);
    let mut cfg = TwoLevelConfig::new(1, 5).with_bottom(BottomKind::Tree).with_n_probe(1);
    cfg.tree_budget = ProbeBudget::Leaves(3);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    let mut tc = cfg.tree.clone();
    tc.seed = indexed_seed(cfg.tree.seed, 0);
    let tree = QlbTree::build(&cat, None, &tc).unwrap();
    for q in queries(10, 8, 6) {
        let (a, sa) = idx.search(&q, None, 5).unwrap();
        let (b, sb) = tree.search(&q, 5, ProbeBudget::Leaves(3)).unwrap();
        assert_eq!(a, b);
        // one brute top evaluation on top of the tree's own cost
        assert_eq!(sa.distance_computations, sb.distance_computations + 1);
    }
}

#[test]
fn singleton_subsets_search_nearest_centroids() {
    let cat = random_catalog(40, 3, 7);
    let cfg = TwoLevelConfig::new(40, 8).with_n_probe(5);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    assert!(idx.partition().subset_sizes().iter().all(|&s| s == 1));
    for q in queries(10, 3, 9) {
        let (res, stats) = idx.search(&q, None, 5).unwrap();
        assert_eq!(res.ids(), quadratic_oracle(&cat, &q, 5));
        assert_eq!(stats.distance_computations, 40 + 5);
    }
}

#[test]
fn query_at_a_centroid_scans_one_subset() {
    let (cat, _, _) = generate_synthetic(&SyntheticConfig::new(2000, 8, 10, 1)).unwrap();
    let cfg = TwoLevelConfig::new(10, 2).with_n_probe(1);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    for (i, c) in idx.partition().centroids.iter().enumerate() {
        let (_, stats) = idx.search(c, None, 10).unwrap();
        let size = idx.partition().subset_members[i].len() as u64;
        assert_eq!(stats.distance_computations, size + 10);
    }
}

#[test]
fn stats_are_top_plus_bottoms() {
    let cat = random_catalog(500, 6, 10);
    let mut cfg = TwoLevelConfig::new(12, 11).with_top(TopKind::Pq).with_bottom(BottomKind::Lsh).with_n_probe(4);
    cfg.lsh.bits_per_table = 4;
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    let q = &queries(1, 6, 12)[0];
    let (subsets, top) = idx.route(q, 4).unwrap();
    let mut expected = top;
    for s in subsets {
        if let Bottom::Lsh(l) = &idx.bottoms[s] {
            expected += l.search(q, 10, cfg.lsh_radius).unwrap().1;
        } else if let Bottom::Brute(f) = &idx.bottoms[s] {
            expected += f.search(q, 10).unwrap().1;
        }
    }
    let (_, got) = idx.search(q, None, 10).unwrap();
    assert!(got.same_counts(&expected));
}

#[test]
fn small_subsets_fall_back_to_brute() {
    let cat = random_catalog(60, 4, 13);
    let cfg = TwoLevelConfig::new(10, 14).with_bottom(BottomKind::Lsh);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    let small = idx.partition().subset_sizes().iter().filter(|&&s| s < LSH_MIN_SUBSET).count();
    assert_eq!(idx.build_report().brute_fallbacks.len(), small);
    assert!(small > 0);
}

#[test]
fn recall_non_decreasing_in_n_probe() {
    let (cat, mix, _) = generate_synthetic(&SyntheticConfig::new(5000, 16, 50, 3)).unwrap();
    let qs = mix.sample_queries(200, 4);
    let truth = crate::io::compute_ground_truth(&cat, &qs, 10).unwrap();
    let cfg = TwoLevelConfig::new(50, 5).with_top(TopKind::Pq);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    let mut last = 0.0;
    for n_probe in [1, 2, 4, 8, 16] {
        let res: Vec<ResultSet> = qs.iter().map(|q| idx.search_with(q, None, 10, n_probe).unwrap().0).collect();
        let r = crate::bench::recall_at_k(&res, &truth, 10).unwrap();
        assert!(r >= last, "recall fell to {r} at n_probe {n_probe}");
        last = r;
    }
}

#[test]
fn external_features_route_queries() {
    let cat = random_catalog(300, 8, 15);
    let feats: Vec<Vector> = cat.records().iter().map(|r| Vector::new(r.embedding[..2].to_vec()).unwrap()).collect();
    let features = PartitionFeatures::new(feats).unwrap();
    let mut cfg = TwoLevelConfig::new(16, 16).with_top(TopKind::KdTree).with_n_probe(16);
    cfg.partition_feature = PartitionFeature::External;
    let idx = build_two_level(&cat, Some(&features), None, &cfg).unwrap();
    assert_eq!(idx.feature_dim(), 2);
    let q = &queries(1, 8, 17)[0];
    let (res, _) = idx.search(q, Some(&q[..2]), 5).unwrap();
    assert_eq!(res.ids(), quadratic_oracle(&cat, q, 5));
    assert!(idx.search(q, None, 5).is_err());
    assert!(idx.search(q, Some(&q[..3]), 5).is_err());
    assert!(build_two_level(&cat, None, None, &cfg).is_err());
}

#[test]
fn boosted_bottoms_need_a_profile() {
    let cat = random_catalog(200, 4, 18);
    let mut cfg = TwoLevelConfig::new(4, 19).with_bottom(BottomKind::Tree);
    cfg.tree = TreeConfig::boosted(3);
    assert!(build_two_level(&cat, None, None, &cfg).is_err());
    let sim = simulate_likelihoods(&BetaSimConfig {
        alpha: 0.5,
        beta: 1.0,
        num_entities: 200,
        num_queries: 10,
        seed: 1,
    })
    .unwrap();
    assert!(build_two_level(&cat, None, Some(&sim.profile), &cfg).is_ok());
}

#[test]
fn footprint_and_component_round_trip() {
    let cat = random_catalog(300, 8, 20);
    for (top, bottom) in [(TopKind::Pq, BottomKind::Tree), (TopKind::KdTree, BottomKind::Lsh), (TopKind::Brute, BottomKind::Brute)] {
        let cfg = TwoLevelConfig::new(6, 21).with_top(top).with_bottom(bottom);
        let idx = build_two_level(&cat, None, None, &cfg).unwrap();
        let fp = idx.footprint();
        assert_eq!(fp.total, fp.partition + fp.top + fp.bottoms.iter().sum::<usize>());
        let back = TwoLevelIndex::from_component_bytes(
            cfg.clone(),
            &idx.partition_bytes(),
            &idx.top_bytes(),
            &idx.bottoms_bytes(),
        )
        .unwrap();
        assert_eq!(back.bottoms, idx.bottoms);
        assert_eq!(back.top_bytes(), idx.top_bytes());
        assert_eq!(back.footprint(), fp);
    }
    assert_eq!(bottom_bytes(&Bottom::Empty).len(), 9);
}

#[test]
fn sampled_partition_may_leave_empty_subsets() {
    let cat = Catalog::from_rows((0..100).map(|i| vec![(i / 50) as f32 * 10.0, 0.0]).collect()).unwrap();
    let mut cfg = TwoLevelConfig::new(3, 22).with_n_probe(3);
    cfg.kmeans_sample = Some(3);
    let idx = build_two_level(&cat, None, None, &cfg).unwrap();
    assert_eq!(idx.partition().subset_sizes().iter().sum::<usize>(), 100);
    let (res, _) = idx.search(&[0.0, 0.0], None, 3).unwrap();
    assert_eq!(res.ids(), vec![0, 1, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn exhaustive_composition_matches_oracle(n in 5usize..120, dim in 1usize..10, k in 1usize..12, subsets in 1usize..6, seed in 0u64..1000) {
        let subsets = subsets.min(n);
        let cat = random_catalog(n, dim, seed);
        let cfg = TwoLevelConfig::new(subsets, seed).with_n_probe(subsets);
        let idx = build_two_level(&cat, None, None, &cfg).unwrap();
        let q = &queries(1, dim, seed + 1)[0];
        let (res, _) = idx.search(q, None, k).unwrap();
        prop_assert_eq!(res.ids(), quadratic_oracle(&cat, q, k));
    }
}
