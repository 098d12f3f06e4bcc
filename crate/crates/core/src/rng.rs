//! Reproducible random streams keyed by `(seed, cell, replicate)`.
//!
//! Every Monte Carlo replicate owns an independent ChaCha8 stream, so results
//! never depend on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
  z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
  z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
  z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
  z ^ (z >> 31)
}

/// The stream for replicate `replicate` of experiment cell `cell`.
pub fn stream(seed: u64, cell: u64, replicate: u64) -> StreamRng {
  let mut key = [0u8; 32];
  let mut state = seed;
  for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
    state = splitmix64(state ^ cell.rotate_left(17 * i as u32 + 7));
    chunk.copy_from_slice(&state.to_le_bytes());
  }
  let mut rng = ChaCha8Rng::from_seed(key);
  rng.set_stream(replicate);
  rng
}
