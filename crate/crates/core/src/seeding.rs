//! Stable derivation of independent RNG streams from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a ChaCha stream keyed by `(seed, parts...)`. Stable across platforms and runs.
pub fn derive_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = derive_rng(7, &["subject-1"]).random();
        let b: u64 = derive_rng(7, &["subject-1"]).random();
        let c: u64 = derive_rng(7, &["subject-2"]).random();
        let d: u64 = derive_rng(8, &["subject-1"]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn part_boundaries_matter() {
        let a: u64 = derive_rng(1, &["ab", "c"]).random();
        let b: u64 = derive_rng(1, &["a", "bc"]).random();
        assert_ne!(a, b);
    }
}
