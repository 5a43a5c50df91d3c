//! Keyed deterministic random streams.
//!
//! Every stochastic quantity in this crate (reparametrized samples, dataset
//! noise, batch selection, feature erasure) is drawn from a ChaCha stream
//! whose key is derived from a user seed plus a list of context tags,
//! typically an operation label and an item or embedding id. Streams keyed
//! this way are independent of evaluation order: sampling embedding "x" gives
//! the same draws whether it is sampled first, last, or concurrently.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse a seed and context tags into a single 64-bit key.
///
/// Tags are length-prefixed so `["ab", "c"]` and `["a", "bc"]` key different
/// streams.
pub fn stream_seed(seed: u64, tags: &[&[u8]]) -> u64 {
    let mut hash = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    for tag in tags {
        hash = fnv1a(hash, &(tag.len() as u64).to_le_bytes());
        hash = fnv1a(hash, tag);
    }
    hash
}

/// A ChaCha generator keyed by `(seed, tags)`.
pub fn keyed_rng(seed: u64, tags: &[&[u8]]) -> ChaCha12Rng {
    let mut state = stream_seed(seed, tags);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix_next(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
