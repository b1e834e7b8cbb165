//! Seeded 64-bit mixing used for every pseudorandom choice the sketch makes.
//!
//! All choices are pure functions of `(seed, tag, key)`, so a row's level,
//! bucket and sample membership can be recomputed on demand for every
//! update that touches it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain-separation tags.
pub(crate) const TAG_LEVEL: u64 = 0x6c65_7665_6c00_0001;
pub(crate) const TAG_BUCKET: u64 = 0x6275_636b_6574_0002;
pub(crate) const TAG_SAMPLE: u64 = 0x7361_6d70_6c65_0003;
pub(crate) const TAG_CELL: u64 = 0x6365_6c6c_0000_0004;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn keyed(seed: u64, tag: u64, key: u64) -> u64 {
    let k = mix64(seed ^ tag.wrapping_mul(GOLDEN));
    mix64(k ^ key.wrapping_add(GOLDEN).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Maps a hash to `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Maps a hash to `[0, range)` by multiply-shift.
#[inline]
pub fn bounded(h: u64, range: usize) -> usize {
    ((h as u128 * range as u128) >> 64) as usize
}

/// Hash of an arbitrary byte string, used to derive per-cell seeds.
pub fn hash_bytes(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = mix64(seed ^ TAG_CELL);
    for chunk in bytes.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(buf)).wrapping_add(chunk.len() as u64);
    }
    mix64(h)
}
