use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, index)`: one ChaCha stream per index, so
/// results do not depend on the order in which indices are processed.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
