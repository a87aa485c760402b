//! Seeding and hashing helpers shared by every stochastic step.
//!
//! All randomness comes from ChaCha8 (the `rand_chacha` stream cipher RNG),
//! which produces the same stream on every platform for a given seed and
//! stream number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Named RNG streams so independent consumers of one seed never overlap.
pub mod stream {
    pub const SCHEDULE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const FOLDS: u64 = 6;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Derives a child seed from a parent seed and a textual tag (first eight
/// bytes of SHA-256 over the little-endian seed followed by the tag).
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 yields 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize to JSON");
    sha256_hex(&bytes)
}
