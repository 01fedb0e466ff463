//! Seeding for run-owned random streams.
//!
//! Every run owns exactly one `ChaCha8Rng`. Sweep seeds are a hash of
//! `(base seed, cell index, run index)` rather than a sum, so adding a cell
//! never shifts the streams of existing cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

pub fn run_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run` of sweep cell `cell`.
pub fn cell_seed(base_seed: u64, cell: u64, run: u64) -> u64 {
    mix(mix(mix(base_seed) ^ cell) ^ run)
}
