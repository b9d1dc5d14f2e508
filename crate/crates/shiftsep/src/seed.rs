//! Deterministic sub-seed derivation from a master seed.

/// SplitMix64 step; good avalanche, stable across platforms.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a stage label and an index.
pub(crate) fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut acc = splitmix64(master);
    for byte in label.bytes() {
        acc = splitmix64(acc ^ u64::from(byte));
    }
    splitmix64(acc ^ index.wrapping_mul(0xD134_2543_DE82_EF95))
}
