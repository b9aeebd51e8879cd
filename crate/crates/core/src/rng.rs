//! Deterministic random substreams.
//!
//! Every random decision in the pipeline draws from a stream keyed by
//! `(master seed, domain, id)`, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Changing a value changes every result in that domain.
pub mod domain {
    pub const OBFUSCATION: u64 = 1;
    pub const UNINFORMED: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const VARIOGRAM: u64 = 5;
    pub const SYNTH: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `id` within `domain`.
pub fn substream(seed: u64, domain: u64, id: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain.wrapping_mul(0x632b_e59b_d9b4_e019)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(id);
    rng
}
