//! Per-path random streams.
//!
//! Every path draws from its own ChaCha8 keystream: the key is derived from
//! the run seed and the stream id is the path index. Draws inside a path are
//! consumed in step order, so a path's noise is a pure function of
//! `(seed, path_index, step_index)` and does not depend on how paths are
//! distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, path_index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}
