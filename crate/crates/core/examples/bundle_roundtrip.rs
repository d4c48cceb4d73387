//! Save an index as a bundle directory, reload it and check it answers identically.

use edgeann::bundle::{load_bundle, save_bundle, AnyIndex, SearchParams};
use edgeann::io::{generate_synthetic, SyntheticConfig};
use edgeann::twolevel::{build_two_level, TopKind, TwoLevelConfig};
use edgeann::ProbeBudget;

fn main() -> edgeann::Result<()> {
    let (catalog, mixture, _) = generate_synthetic(&SyntheticConfig::new(5000, 16, 40, 2))?;
    let index = AnyIndex::TwoLevel(build_two_level(&catalog, None, None, &TwoLevelConfig::new(50, 1).with_top(TopKind::Pq))?);

    let dir = std::env::temp_dir().join("edgeann-bundle-example");
    let manifest = save_bundle(&dir, &index)?;
    for c in &manifest.components {
        println!("{:<12} {:>8} bytes  crc32 {:08x}", c.file, c.bytes, c.crc32);
    }

    let loaded = load_bundle(&dir)?;
    let params = SearchParams { k: 5, budget: ProbeBudget::unlimited(), radius: 1, n_probe: Some(4) };
    for q in mixture.sample_queries(20, 3) {
        assert_eq!(index.search(q.as_slice(), None, &params)?.0, loaded.search(q.as_slice(), None, &params)?.0);
    }
    println!("reloaded bundle from {} answers identically", dir.display());
    Ok(())
}
