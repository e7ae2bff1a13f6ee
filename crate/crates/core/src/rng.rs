//! Seeded randomness with reproducible per-item streams.
//!
//! Every random stage takes an explicit generator. Item `i` of a batch draws
//! from ChaCha8 keyed by the master seed with stream id `i`, so items can be
//! processed in any order or in parallel and still reproduce a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DetRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for item `index` under `master_seed`.
pub fn item_rng(master_seed: u64, index: u64) -> DetRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
