//! Counter-based derivation of independent random streams.
//!
//! A stream is keyed by a master seed plus a tuple of tags (for example
//! horizon, batch and trial index), so the numbers a trial sees depend only on
//! its coordinates and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit key identifying the stream `(master, tags...)`.
pub fn stream_key(master: u64, tags: &[u64]) -> u64 {
    let mut state = master;
    let mut key = splitmix64(&mut state);
    for &tag in tags {
        state ^= tag.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        key ^= splitmix64(&mut state).rotate_left(17);
        state = state.wrapping_add(key);
    }
    key
}

pub fn stream(master: u64, tags: &[u64]) -> StreamRng {
    let mut state = stream_key(master, tags);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
