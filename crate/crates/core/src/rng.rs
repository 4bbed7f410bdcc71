//! Named, counter-keyed random streams.
//!
//! Every stochastic step draws from a ChaCha stream whose key is derived from
//! the user seed plus a tag path such as `[BOOTSTRAP, replicate]`, so results do
//! not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod tag {
    pub const RELABEL: u64 = 0x5245_4c41;
    pub const SPLIT_SAMPLE: u64 = 0x5350_4c54;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const DESIGN: u64 = 0x4445_5347;
    pub const ALTERNATIVE: u64 = 0x414c_5445;
    pub const FE_PERMUTATION: u64 = 0x4645_5052;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a seed and a tag path into a single 64-bit key.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Independent ChaCha8 stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let key = derive_seed(seed, path);
    let mut bytes = [0u8; 32];
    let mut s = key;
    for chunk in bytes.chunks_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
