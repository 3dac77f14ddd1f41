//! Splittable, counter-keyed random streams.
//!
//! Every Monte Carlo routine receives its randomness through a stream derived
//! from `(experiment seed, structural path)`, where the path is a short list
//! of integers such as `(TRIAL, degree, trial index)`. The derivation hashes
//! the seed and path with SHA-256 and seeds a ChaCha8 generator with the
//! digest, so:
//!
//! * streams for distinct paths are statistically independent;
//! * a stream depends only on its path, never on scheduling — parallel
//!   workers can pick up any subset of paths and the numbers drawn inside
//!   each unit of work are identical, making outputs bit-identical for any
//!   worker count;
//! * reproducing a single trial needs only the seed and the path.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Path tag for Monte Carlo chunks of the limit-law estimators.
pub const TAG_MC_CHUNK: u64 = 1;
/// Path tag for per-trial streams of zero-set experiments.
pub const TAG_TRIAL: u64 = 2;
/// Path tag for hole-probability trials.
pub const TAG_HOLE: u64 = 3;
/// Path tag for convergence-sequence streams.
pub const TAG_SEQUENCE: u64 = 4;
/// Path tag for calibration runs.
pub const TAG_CALIBRATE: u64 = 5;

/// Derive the deterministic stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in path {
        hasher.update(part.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
