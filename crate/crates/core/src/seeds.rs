//! Deterministic seed derivation for per-code and per-trial random streams.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// splitmix64 finalizer; standard constants.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a master seed and a stream index.
pub(crate) fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream ^ 0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-copy stream for experiment trials: order-independent across copies.
pub(crate) fn trial_rng(master_seed: u64, copy_id: u64) -> ChaCha8Rng {
    rng(derive(master_seed, copy_id))
}
