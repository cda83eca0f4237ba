//! Seed plumbing. Every random draw in the crate comes from a ChaCha stream
//! selected by `(root seed, stream name[, index])`, so enabling one feature
//! (say, attention weights) never shifts the draws of another (dropout).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INIT_WEIGHTS: &str = "init/weights";
pub const INIT_ATTENTION: &str = "init/attention";
pub const DROPOUT: &str = "dropout";
pub const SPLITS: &str = "splits";
pub const SAMPLING: &str = "sampling";
pub const BATCHES: &str = "batches";

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Stream for one indexed draw (an epoch, a task, an instance).
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index.wrapping_add(1))));
    rng.set_stream(fnv1a(name));
    rng
}
