//! Deterministic RNG substreams.
//!
//! Every random draw in the crate flows through a [`ChaCha8Rng`] keyed by
//! `(seed, domain, a, b)`. Streams for distinct key tuples are independent,
//! so per-record and per-replication work can run in any order (or in
//! parallel) without changing results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Key domains; keeps streams from different subsystems disjoint.
pub mod domain {
    /// S-step record imputation, keyed by (cycle, record index).
    pub const SEM: u64 = 1;
    /// Information-matrix imputation, keyed by (imputation index, record index).
    pub const INFO: u64 = 2;
    /// Synthetic batch generation, keyed by (unit index, 0).
    pub const GEN: u64 = 3;
    /// Simulation replications, keyed by (replication, role).
    pub const STUDY: u64 = 4;
}

/// Independent stream for the key tuple `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derives a fresh 64-bit seed from a stream key, for nesting runs
/// (e.g. one replication of a study seeds its own SEM run).
pub fn derive_seed(seed: u64, domain: u64, a: u64, b: u64) -> u64 {
    use rand_chacha::rand_core::RngCore;
    stream(seed, domain, a, b).next_u64()
}
