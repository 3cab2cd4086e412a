//! Seed derivation.
//!
//! Every random draw in a simulation comes from a ChaCha stream keyed by the
//! run seed, a purpose tag and up to two coordinates (round, client, label).
//! Streams never depend on execution order, so clients and labels can be
//! trained in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Dataset,
    Allocation,
    Selection,
    ClientTraining,
    AttackerTraining,
    Auxiliary,
    Planting,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x9e37_79b9_7f4a_7c15,
            Purpose::Dataset => 0xbf58_476d_1ce4_e5b9,
            Purpose::Allocation => 0x94d0_49bb_1331_11eb,
            Purpose::Selection => 0xd6e8_feb8_6659_fd93,
            Purpose::ClientTraining => 0xa076_1d64_78bd_642f,
            Purpose::AttackerTraining => 0xe703_7ed1_a0b4_28db,
            Purpose::Auxiliary => 0x8ebc_6af0_9c88_c6e3,
            Purpose::Planting => 0x5899_65cc_7537_4cc3,
        }
    }
}

/// Deterministic generator for `(seed, purpose, a, b)`.
pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.tag());
    rng.set_stream((a << 32) ^ b);
    rng
}
