//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha8 stream whose 64-bit seed is
//! derived from a master seed and an index path with SplitMix64 mixing:
//!
//! ```text
//! h0 = mix(master)
//! h_{k+1} = mix(h_k ^ mix(path[k] + GOLDEN))
//! ```
//!
//! A replicate's stream therefore depends only on `(master, trial, signal,
//! replicate)` and never on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the stream at `path` under `master`.
pub fn child_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(master), |h, &p| mix(h ^ mix(p.wrapping_add(GOLDEN))))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(child_seed(master, path))
}
