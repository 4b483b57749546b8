//! Keyed pseudorandom functions used for reproducible per-item randomness.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
pub fn hash2(seed: u64, a: u64) -> u64 {
    mix64(seed ^ mix64(a))
}

#[inline]
pub fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    mix64(hash2(seed, a) ^ mix64(b ^ 0xD6E8_FEB8_6659_FD93))
}

#[inline]
pub fn hash_u128(seed: u64, key: u128) -> u64 {
    hash3(seed, key as u64, (key >> 64) as u64)
}

/// Hash a sequence of words.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ words.len() as u64);
    for &w in words {
        h = mix64(h ^ mix64(w));
    }
    h
}

/// Uniform in the open interval (0,1).
#[inline]
pub fn unit_open(h: u64) -> f64 {
    ((h >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// Derive an independent child seed.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    hash2(seed ^ 0x5851_F42D_4C95_7F2D, tag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_open_is_strictly_inside() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }

    #[test]
    fn hashes_are_deterministic_and_spread() {
        assert_eq!(hash3(1, 2, 3), hash3(1, 2, 3));
        assert_ne!(hash3(1, 2, 3), hash3(1, 3, 2));
        let mut ones = 0u32;
        for i in 0..4096u64 {
            ones += hash2(99, i).count_ones();
        }
        let mean = ones as f64 / 4096.0;
        assert!((mean - 32.0).abs() < 0.5);
    }
}
