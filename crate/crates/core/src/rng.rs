use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used throughout; a fixed seed gives bit-identical streams.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream derived from `seed` and a label.
pub fn derived(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
