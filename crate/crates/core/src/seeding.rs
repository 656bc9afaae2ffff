//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline is driven by a ChaCha8 generator
//! keyed through this module, so a run is a pure function of its root seed.
//! Sub-streams are derived with SplitMix64 over `seed ^ (salt * PHI)`, which
//! decorrelates streams for nearby salts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives an independent sub-seed from a root seed and a salt.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(PHI);
    z = z.wrapping_add(PHI);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The crate's pinned pseudo-random generator (ChaCha8), keyed by a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Salt namespaces. Keeping them in one place makes the derivation scheme
// auditable: two call sites never reuse a (seed, salt) pair.
pub const SALT_DARKL_INIT: u64 = 0x01;
pub const SALT_UTP_INIT: u64 = 0x02;
pub const SALT_KEYGEN: u64 = 0x03;
pub const SALT_TARGET_SPLIT: u64 = 0x04;
pub const SALT_UTP_SCRATCH: u64 = 0x05;
pub const SALT_LABELS: u64 = 0x06;
pub const SALT_CITY: u64 = 0x07;
pub const SALT_EPOCH: u64 = 0x08;
pub const SALT_ENCRYPT: u64 = 0x09;
pub const SALT_FINE_TUNE: u64 = 0x0A;

/// Seed for one client's local epoch within one federated round.
pub fn epoch_seed(run_seed: u64, round: usize, city_id: u32, epoch: usize) -> u64 {
    let a = derive_seed(run_seed, SALT_EPOCH);
    let b = derive_seed(a, round as u64);
    let c = derive_seed(b, u64::from(city_id));
    derive_seed(c, epoch as u64)
}
