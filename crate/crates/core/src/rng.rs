//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! master seed, with the stream id derived from a path of integers (purpose
//! tag, replication index, resample index, ...). Two different paths never
//! share a stream, and a stream does not depend on how many numbers other
//! streams consumed, so parallel and serial runs see identical draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GENERATOR_NAME: &str = "ChaCha8 (rand_chacha 0.3), stream = splitmix64 fold of the substream path";

pub type Rng = ChaCha8Rng;

// Purpose tags, kept distinct so substreams for different uses never collide.
pub const TAG_LOADINGS: u64 = 1;
pub const TAG_REPLICATION: u64 = 2;
pub const TAG_SIGN_BOOTSTRAP: u64 = 3;
pub const TAG_RANK_BOOTSTRAP: u64 = 4;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for the substream identified by `path` under `master`.
pub fn substream(master: u64, path: &[u64]) -> Rng {
    let mut id = 0x5EED_0000_0000_0001u64;
    for &p in path {
        id = splitmix64(id ^ splitmix64(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}
