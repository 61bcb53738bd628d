//! Keyed random substreams.
//!
//! Every stochastic decision in a run draws from its own ChaCha stream whose
//! 256-bit key is the SHA-256 digest of `(base_seed, condition_id,
//! replication, label)`. Streams therefore do not depend on scheduling or on
//! which other methods were requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The random-stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Stream labels used by the simulation harness.
pub mod labels {
    pub const FEATURES: &str = "features";
    pub const NOISE_LARGE: &str = "noise_large";
    pub const NOISE_SMALL: &str = "noise_small";
    pub const VOXEL_NOISE_LARGE: &str = "voxel_noise_large";
    pub const VOXEL_NOISE_SMALL: &str = "voxel_noise_small";
    pub const FR_SPLIT: &str = "fr_split";
    pub const CV_FOLDS: &str = "cv_folds";
    pub const CROSS_CORR: &str = "cross_corr";
    pub const SUBSAMPLE: &str = "subsample";
}

const DOMAIN: &[u8] = b"rsacmp/stream/v1";

pub fn derive_stream(base_seed: u64, condition_id: u64, replication: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(base_seed.to_le_bytes());
    hasher.update(condition_id.to_le_bytes());
    hasher.update(replication.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
