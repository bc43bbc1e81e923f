//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator whose key is derived from a master
//! seed and a string key, and whose stream number is the replication index,
//! so draws depend only on (seed, key, replication) and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for a single seeded draw.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for replication `rep` of the cell identified by `key`.
pub fn substream(master_seed: u64, key: &str, rep: u64) -> StreamRng {
    let seed = splitmix64(master_seed ^ splitmix64(stable_hash(key.as_bytes())));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}
