//! Splittable seed derivation.
//!
//! Every per-scene, per-view and per-transmitter seed is derived from its
//! parent with [`child`], so any work unit can be regenerated in isolation and
//! the order in which units are processed never affects their output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `child = mix64(parent ^ mix64(index))`.
#[inline]
pub fn child(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Deterministic RNG for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain-separation salts so sibling streams derived from one seed never
/// share a child index.
pub mod stream {
    pub const SCENE: u64 = 1;
    pub const TRAJECTORY: u64 = 2;
    pub const TX: u64 = 3;
    pub const LSHAPE: u64 = 4;
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn children_do_not_collide() {
        let mut seen = HashSet::new();
        for parent in 0..64u64 {
            for idx in 0..256u64 {
                assert!(seen.insert(child(parent, idx)));
            }
        }
    }

    #[test]
    fn child_is_pure() {
        assert_eq!(child(42, 7), child(42, 7));
        assert_ne!(child(42, 7), child(7, 42));
    }
}
