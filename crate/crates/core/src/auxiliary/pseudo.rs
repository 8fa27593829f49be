use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::math;

/// Deterministic, non-semantic text "embedding": a seeded hash of the
/// string drives a Gaussian draw that is then normalized. Similar strings
/// do not get similar vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudoEmbedder {
    dim: usize,
    seed: u64,
}

impl PseudoEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        loop {
            let raw: Vec<f32> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(v) = math::normalized(&raw) {
                return v;
            }
        }
    }
}
