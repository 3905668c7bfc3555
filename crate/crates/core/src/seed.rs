//! Stable seed derivation. `std`'s hashers are not guaranteed stable across
//! releases, so seeds are combined with SplitMix64 finalizers instead.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive mix of a sequence of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x6a09_e667_f3bc_c908, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}
