//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the master
//! seed and a purpose tag, with the trial (or replication) index selecting
//! the stream. Results therefore do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the key space of different simulations.
pub mod purpose {
    pub const COVERAGE: u64 = 0x434f_5645;
    pub const COOP_SET: u64 = 0x434f_4f50;
    pub const DEPLOYMENT: u64 = 0x4445_504c;
    pub const MOBILITY: u64 = 0x4d4f_4249;
    pub const LAPLACE: u64 = 0x4c41_504c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream `index` of the generator keyed by `(seed, purpose)`.
pub fn substream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose)));
    rng.set_stream(index);
    rng
}
