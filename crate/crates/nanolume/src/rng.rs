//! Deterministic substream derivation.
//!
//! Every stochastic component draws from a ChaCha stream keyed by
//! (user seed, domain tag, substream index) through a SplitMix64 mix.
//! Logical streams are independent and reproducible regardless of the
//! order in which they are consumed, which is what makes segment-parallel
//! simulation bit-identical to the sequential run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep substreams from distinct pipeline stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Emission,
    Detection,
    Beamsplitter,
    FitJitter,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Emission => 0x4e4c_454d_4954_0001,
            Domain::Detection => 0x4e4c_4445_5443_0002,
            Domain::Beamsplitter => 0x4e4c_4253_504c_0003,
            Domain::FitJitter => 0x4e4c_4649_544a_0004,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the deterministic RNG for (`seed`, `domain`, `index`).
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ domain.tag()) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}
