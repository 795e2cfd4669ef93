//! Seeded random streams.
//!
//! Every Monte Carlo work item (a replication, a block of draws) gets its own
//! ChaCha stream addressed by `(seed, purpose, index)`. Results therefore do
//! not depend on how items are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulation in the crate.
pub type McRng = ChaCha8Rng;

/// Named purposes keep calibration and evaluation draws apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Calibration = 0x6361_6c69,
    Evaluation = 0x6576_616c,
    NormalizingMatrix = 0x6e6f_726d,
    Probe = 0x7072_6f62,
    Data = 0x6461_7461,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. one per sample size of a power curve.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag)
}

/// Counter-addressed substream: the key mixes `seed` and `purpose`, the
/// ChaCha stream id is `index`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> McRng {
    let mut rng = McRng::seed_from_u64(derive_seed(seed, purpose as u64));
    rng.set_stream(index);
    rng
}
