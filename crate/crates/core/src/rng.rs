//! Seeded random streams.
//!
//! Every consumer derives its own ChaCha stream from `(seed, purpose)`, so
//! adding draws to one generator never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for independent substreams.
pub mod purpose {
    pub const STIEFEL_POINT: u64 = 1;
    pub const CIRCLE_DATA: u64 = 2;
    pub const MIXTURE_DATA: u64 = 3;
    pub const SPCA_DATA: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const SPCA_INIT: u64 = 6;
}

pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}
