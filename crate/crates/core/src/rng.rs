//! Seeded generators. Each consumer draws from its own ChaCha stream, so reusing
//! one seed for a dataset, a split and a model does not correlate them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Split = 1,
    Synthetic = 2,
    Training = 3,
    Targets = 4,
}

pub(crate) fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
