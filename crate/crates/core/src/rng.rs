//! Named random streams derived from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-generators; each uses its own ChaCha stream so adding
/// draws to one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Chain = 2,
    Shuffle = 3,
    Pairs = 4,
    Synth = 5,
    Kmeans = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
