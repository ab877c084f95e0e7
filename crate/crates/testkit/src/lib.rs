//! Test support: slow but obviously-correct reference implementations and a
//! synthetic image corpus with matching metadata tables.

pub mod corpus;
pub mod oracles;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
