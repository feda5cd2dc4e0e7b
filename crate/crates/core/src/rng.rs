//! Deterministic seeding.
//!
//! Sub-run seeds are `derive_seed(master, tag, n, id)`:
//!
//! ```text
//! h = FNV-1a-64(tag)
//! s = splitmix64(master ^ h)
//! s = splitmix64(s ^ n)
//! s = splitmix64(s ^ id)
//! ```
//!
//! Each (path, player) pair then owns an independent ChaCha8 stream keyed by the
//! derived seed, with stream number `(path << 32) | player`. ChaCha is counter based,
//! so a stream's draws never depend on how other streams are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: &str, n: u64, id: u64) -> u64 {
    let s = splitmix64(master ^ fnv1a(tag.as_bytes()));
    let s = splitmix64(s ^ n);
    splitmix64(s ^ id)
}

/// Noise stream of one (path, player) pair.
pub fn player_stream(seed: u64, path: usize, stream: u64) -> ChaCha8Rng {
    assert!(stream <= u32::MAX as u64 && (path as u64) <= u32::MAX as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((path as u64) << 32) | stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn splitmix_reference_value() {
        // first output of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn derived_seeds_separate_inputs() {
        let base = derive_seed(7, "study", 8, 0);
        assert_eq!(base, derive_seed(7, "study", 8, 0));
        assert_ne!(base, derive_seed(7, "study", 16, 0));
        assert_ne!(base, derive_seed(7, "gap", 8, 0));
        assert_ne!(base, derive_seed(7, "study", 8, 1));
        assert_ne!(base, derive_seed(8, "study", 8, 0));
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a: u64 = player_stream(1, 0, 0).random();
        let b: u64 = player_stream(1, 0, 1).random();
        let c: u64 = player_stream(1, 1, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, player_stream(1, 0, 0).random::<u64>());
    }
}
