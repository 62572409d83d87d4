//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! user seed plus a stream number, so independent consumers (OD sampling,
//! weight init, action sampling) never perturb one another.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub const STREAM_SCHEDULE: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_ACTIONS: u64 = 3;
pub const STREAM_EPISODE_SEEDS: u64 = 4;
pub const STREAM_EVAL_ACTIONS: u64 = 5;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
