//! Named random sub-streams derived from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derives an independent seed for the component named `label`.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

/// Seed for the `index`-th item of a family, e.g. one bottom index per subset.
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    splitmix(seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_give_distinct_streams() {
        assert_ne!(sub_seed(7, "partition"), sub_seed(7, "tree"));
        assert_eq!(sub_seed(7, "lsh"), sub_seed(7, "lsh"));
        assert_ne!(indexed_seed(7, 0), indexed_seed(7, 1));
    }
}
