//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream. A stream is
//! identified by a master seed plus a path of integer labels (node index,
//! symbol pair, sample index, ...). The path is folded into a 64-bit key
//! with SplitMix64, so the stream a computation sees depends only on what it
//! is, never on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a label path into a child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// Child stream for `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}

/// Stream for the `index`-th item of a batch, e.g. one sample of a dataset.
///
/// Uses the ChaCha stream id rather than re-keying, so it costs the same as
/// cloning a generator.
pub fn indexed_stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(splitmix64(seed));
    rng.set_stream(index);
    rng
}

/// Fixed labels used when deriving streams, so that call sites agree.
pub mod labels {
    pub const FRANK_WOLFE: u64 = 1;
    pub const PMW: u64 = 2;
    pub const MODE_RELEASE: u64 = 3;
    pub const PAIRWISE: u64 = 4;
    pub const MRF: u64 = 5;
    pub const ISING: u64 = 6;
    pub const TRIAL: u64 = 7;
    pub const SAMPLE: u64 = 8;
}
