//! Counter-based seeding: every random stream is keyed by a tuple of
//! integers, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key tuple into a 64-bit seed.
pub fn mix(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C908, |h, &k| splitmix(h ^ splitmix(k)))
}

pub fn stream(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(keys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: u64 = stream(&[1, 2, 3]).gen();
        assert_eq!(a, stream(&[1, 2, 3]).gen::<u64>());
        assert_ne!(a, stream(&[1, 3, 2]).gen::<u64>());
        assert_ne!(mix(&[0]), mix(&[0, 0]));
    }
}
