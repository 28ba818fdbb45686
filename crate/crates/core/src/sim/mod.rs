//! Scenario simulator: synthetic echo paths, playback material and the four
//! labelled acoustic event classes.

pub mod convolve;
pub mod dataset;
pub mod rir;
pub mod scenario;
pub mod signals;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dataset::{dataset_scenarios, make_dataset, ManifestRow};
pub use rir::{gen_rir, perturb_rir, RoomIr};
pub use scenario::{render_scenario, render_scenario_with, RenderedScene, Scenario, TruthEvent, TruthKind};
pub use signals::gen_reference;

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Reference = 1,
    Rir = 2,
    Interferer = 3,
    Contact = 4,
    Noise = 5,
    Dataset = 6,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// splitmix64 of `seed + salt`
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
