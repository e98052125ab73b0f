//! Counter-based seeding.
//!
//! Every random object is drawn from its own ChaCha8 stream keyed by
//! `(master seed, stream id, replication id)`, so the order in which
//! replications are scheduled never changes what they see.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod stream {
    pub const BASIS: u64 = 1;
    pub const COEF: u64 = 2;
    pub const DESIGN: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const SKETCH: u64 = 5;
    pub const ORACLE: u64 = 6;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `(stream, rep)` under `master`.
pub fn substream_seed(master: u64, stream: u64, rep: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.wrapping_mul(0xd134_2543_de82_ef95));
    splitmix64(b ^ rep.wrapping_mul(0xa076_1d64_78bd_642f))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, stream: u64, rep: u64) -> Rng {
    rng_from_seed(substream_seed(master, stream, rep))
}
