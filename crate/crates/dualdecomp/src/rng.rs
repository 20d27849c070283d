//! Counter-based derivation of independent RNG substreams.
//!
//! Every random draw in the toolkit comes from a substream keyed by a root
//! seed plus a label path (domain, agent, iteration, column, ...). Streams
//! are therefore independent of execution order, which keeps parallel
//! oracle fan-out bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Label domains, used as the first element of a label path.
pub mod domain {
    pub const GENERATOR: u64 = 1;
    pub const ORACLE: u64 = 2;
    pub const HEURISTIC: u64 = 3;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a deterministic substream from a root seed and a label path.
pub fn substream(root: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(root ^ 0x6A09_E667_F3BC_C909);
    for &label in labels {
        state = splitmix64(state ^ splitmix64(label.wrapping_add(0x510E_527F_ADE6_82D1)));
    }
    ChaCha8Rng::seed_from_u64(state)
}
