//! Order-independent seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value derived here, so parallel work can be scheduled in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different roles disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Session,
    Shots,
    Obfuscation,
    Rff,
    Decoy,
    Adversary,
    Folds,
    Subsample,
    Noise,
    Teleport,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Session => 0x5345_5353,
            Purpose::Shots => 0x5348_4f54,
            Purpose::Obfuscation => 0x4f42_4653,
            Purpose::Rff => 0x5246_4644,
            Purpose::Decoy => 0x4445_434f,
            Purpose::Adversary => 0x4144_5652,
            Purpose::Folds => 0x464f_4c44,
            Purpose::Subsample => 0x5355_4253,
            Purpose::Noise => 0x4e4f_4953,
            Purpose::Teleport => 0x5445_4c45,
        }
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of `(master, i, j, purpose)`.
pub fn derive_seed(master: u64, i: u64, j: u64, purpose: Purpose) -> u64 {
    let mut h = mix64(master ^ purpose.tag());
    h = mix64(h ^ i);
    h = mix64(h ^ j.rotate_left(32));
    h
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, i: u64, j: u64, purpose: Purpose) -> ChaCha8Rng {
    rng_from(derive_seed(master, i, j, purpose))
}
