//! Namespaced seed derivation: one master seed fans out into independent
//! streams per phase and worker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, phase: &str, index: u64) -> u64 {
    let tag = crate::nn::fnv1a64(phase.as_bytes());
    splitmix64(splitmix64(master ^ tag) ^ splitmix64(index.wrapping_add(tag)))
}

pub fn rng_for(master: u64, phase: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, phase, index))
}
