//! Random number streams.
//!
//! Every random draw in the library comes from ChaCha8 (`rand_chacha`),
//! seeded with [`rand::SeedableRng::seed_from_u64`] on a 64-bit user seed and
//! split into independent streams with `set_stream`. A chain, sample or
//! translation index selects the stream, so results never depend on how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
