//! Reproducible random streams.
//!
//! Every parallel work item gets its own ChaCha stream derived from the
//! master seed, a domain tag and the item index, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Domain tags keep the streams of unrelated experiments apart.
pub mod domain {
    pub const WALK: u64 = 1;
    pub const BRANCHING: u64 = 2;
    pub const ENVIRONMENT: u64 = 3;
    pub const LYAPUNOV: u64 = 4;
    pub const INVARIANT: u64 = 5;
    pub const SPEED: u64 = 6;
    pub const KERNEL: u64 = 7;
    pub const CONSISTENCY: u64 = 8;
}

pub fn substream(master_seed: u64, domain: u64, index: u64) -> SimRng {
    let key = master_seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

pub fn master(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
