//! Seed derivation. One master seed fans out to labeled per-module streams
//! so a single config knob reproduces the whole pipeline.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derive a child seed from a master seed and a stream label.
///
/// FNV-1a over the master seed bytes followed by the label; stable across
/// platforms and releases, which keeps persisted artifacts reproducible.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in master.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic RNG for a labeled stream.
pub fn rng_for(master: u64, label: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_streams_differ() {
        assert_ne!(derive_seed(7, "split"), derive_seed(7, "embed"));
        assert_ne!(derive_seed(7, "split"), derive_seed(8, "split"));
    }

    #[test]
    fn derivation_is_stable() {
        // Frozen so persisted artifacts stay reproducible across refactors.
        assert_eq!(derive_seed(0, ""), 0xa8c7_f832_281a_39c5);
    }
}
