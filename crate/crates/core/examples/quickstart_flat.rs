//! Exact search over a small random catalog.

use edgeann::{Catalog, FlatIndex};

fn main() -> edgeann::Result<()> {
    let rows: Vec<Vec<f32>> = (0..1000).map(|i| vec![(i % 37) as f32, (i % 11) as f32, (i / 100) as f32]).collect();
    let catalog = Catalog::from_rows(rows)?;
    let index = FlatIndex::build(&catalog)?;

    let (results, stats) = index.search(&[3.2, 4.9, 7.0], 5)?;
    for n in results.neighbors() {
        println!("id {:>4}  distance {:.3}", n.id, n.distance);
    }
    println!("{} distance computations", stats.distance_computations);
    Ok(())
}
