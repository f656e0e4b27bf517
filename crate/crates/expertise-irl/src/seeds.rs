//! Hierarchical seed derivation.
//!
//! Every stochastic stage (environment generation, episode sampling, each
//! MCMC chain, ...) draws from its own ChaCha stream whose seed is derived
//! from the master seed plus a path of integer tags. Results are therefore
//! reproducible from the config alone and independent of evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; the standard finalizer constants.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a path of tags.
///
/// Distinct paths give statistically independent streams; the same path
/// always gives the same seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &tag in path {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)));
    }
    state
}

/// Seeded RNG for the stream identified by `master` and `path`.
pub fn rng_from(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let a: f64 = rng_from(7, &[1, 2, 3]).gen();
        let b: f64 = rng_from(7, &[1, 2, 3]).gen();
        assert_eq!(a, b);
    }

    #[test]
    fn sibling_paths_differ() {
        assert_ne!(derive_seed(7, &[1, 2, 3]), derive_seed(7, &[1, 2, 4]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        // Order matters: [a, b] and [b, a] are different streams.
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
    }

    #[test]
    fn derivation_is_stable() {
        // Frozen value: changing it silently would break every recorded run.
        assert_eq!(derive_seed(42, &[0, 1]), 8686538468284655128);
    }
}
