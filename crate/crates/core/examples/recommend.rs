//! Index layout recommendations across catalog sizes and partitioning features.

use edgeann::twolevel::{recommend_config, Recommendation};

fn main() {
    let cases = [
        (10_000, true, None, None),
        (10_000, false, None, None),
        (1_000_000, false, Some(128), None),
        (50_000, true, Some(2), Some(80)),
        (50_000, true, Some(2), Some(200)),
    ];
    for (size, traffic, dim, subset) in cases {
        let what = match recommend_config(size, traffic, dim, subset) {
            Recommendation::OneLevel { mode } => format!("one-level {mode:?} tree"),
            Recommendation::TwoLevel(c) => format!("{:?} top, {:?} bottom, {} subsets", c.top, c.bottom, c.num_subsets),
        };
        println!("size {size:>9} traffic {traffic:<5} feature dim {dim:?} subset {subset:?}: {what}");
    }
}
