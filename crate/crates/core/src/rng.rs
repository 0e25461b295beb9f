//! Deterministic random substreams.
//!
//! Every random draw in a Monte Carlo run comes from a ChaCha stream keyed by
//! `(seed, point, trial, purpose)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Separate purposes keep draws independent when
/// an experiment adds or removes a processing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scenario = 1,
    Directions = 2,
    Aliens = 3,
    Estimator = 4,
    Auxiliary = 5,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Random generator for one `(seed, point, trial, purpose)` key.
pub fn substream(seed: u64, point: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = splitmix64(splitmix64(splitmix64(point) ^ trial) ^ purpose as u64);
    rng.set_stream(id);
    rng
}
