//! Counter-based random streams keyed by `(seed, round, draw)`.
//!
//! A key always maps to the same ChaCha stream, so a realization can be replayed
//! at a second point without storing it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint under the same seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Gradient = 1,
    Batch = 2,
    Perturbation = 3,
    Dataset = 4,
    Probe = 5,
}

pub fn keyed_rng(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
