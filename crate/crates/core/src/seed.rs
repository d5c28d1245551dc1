//! Deterministic seed expansion.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] whose seed is
//! derived from a single root seed plus a path of labels (topic, N, condition,
//! replicate, ...). Two components that derive with different labels get
//! independent streams; the same labels always give the same stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Expand `root` along a labelled path into a child seed.
pub fn derive(root: u64, labels: &[&dyn SeedLabel]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for label in labels {
        // length prefix keeps ("ab","c") distinct from ("a","bc")
        let bytes = label.label_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

pub trait SeedLabel {
    fn label_bytes(&self) -> Vec<u8>;
}

impl SeedLabel for str {
    fn label_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

impl SeedLabel for &str {
    fn label_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

impl SeedLabel for String {
    fn label_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

impl SeedLabel for u64 {
    fn label_bytes(&self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

impl SeedLabel for usize {
    fn label_bytes(&self) -> Vec<u8> {
        (*self as u64).to_le_bytes().to_vec()
    }
}
