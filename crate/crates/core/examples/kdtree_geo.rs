//! Geolocated entities: a kd-tree over 2-D coordinates routes queries to regional subsets,
//! and each region is searched by embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgeann::twolevel::{build_two_level, PartitionFeature, PartitionFeatures, TopKind, TwoLevelConfig};
use edgeann::{Catalog, KdTree, Vector};

fn main() -> edgeann::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40_000;
    let coords: Vec<Vec<f32>> = (0..n).map(|_| vec![rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0)]).collect();
    let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();

    // nearest places by coordinate alone
    let places = KdTree::build(&Catalog::from_rows(coords.clone())?)?;
    let (near, stats) = places.search(&[48.8, 2.3], 3)?;
    println!("nearest places {:?} after {} distance computations", near.ids(), stats.distance_computations);

    let catalog = Catalog::from_rows(rows)?;
    let features = PartitionFeatures::new(coords.iter().cloned().map(Vector::new).collect::<edgeann::Result<_>>()?)?;
    let mut cfg = TwoLevelConfig::new(400, 1).with_top(TopKind::KdTree).with_n_probe(3);
    cfg.partition_feature = PartitionFeature::External;
    let index = build_two_level(&catalog, Some(&features), None, &cfg)?;

    let query = catalog.embedding(123).as_slice();
    let (res, stats) = index.search(query, Some(&coords[123]), 5)?;
    println!("entity 123 searched in its region: {:?}", res.ids());
    println!("{} distance computations instead of {n}", stats.distance_computations);
    Ok(())
}
