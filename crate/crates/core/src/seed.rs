//! Deterministic sub-seed derivation.

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed of `base` along the path `parts`. Distinct paths give
/// unrelated streams.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_distinct() {
        let a = derive(1, &[0, 1]);
        assert_ne!(a, derive(1, &[1, 0]));
        assert_ne!(a, derive(2, &[0, 1]));
        assert_ne!(a, derive(1, &[0]));
        assert_eq!(a, derive(1, &[0, 1]));
    }
}
