//! Counter-based seed splitting: every stage and slot derives its own RNG
//! from the single master seed, so each is independently reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(master, stream, slot)`.
pub fn subseed(master: u64, stream: u64, slot: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ mix(slot))
}

/// Deterministic RNG for a derived seed.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
