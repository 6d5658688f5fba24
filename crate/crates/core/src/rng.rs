use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream)`; every seeded quantity in the
/// crate draws from one of these so results never depend on call order.
pub fn sub_rng(seed: u64, stream_hi: u64, stream_lo: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream_hi << 32) ^ stream_lo);
    rng
}

pub(crate) mod streams {
    pub const RANDOM_INIT: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const PAIRS: u64 = 3;
    pub const BLOCK_GAUSS: u64 = 4;
    pub const BLOCK_PERM: u64 = 5;
    pub const LOWRANK: u64 = 6;
    pub const LOWRANK_MAP: u64 = 7;
    pub const JOINT_SAMPLE: u64 = 8;
    pub const JOINT: u64 = 9;
    pub const GAUSS: u64 = 10;
    pub const CORRELATION: u64 = 11;
}
