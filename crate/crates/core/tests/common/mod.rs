//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's numeric kernels.

#![allow(dead_code)]

pub mod brute;
pub mod criteria;
pub mod gradcheck;
pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Prints one acceptance line and returns whether it passed.
pub fn report(name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
