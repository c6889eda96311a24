//! Named pseudo-random streams derived from one master seed.
//!
//! Every random family (bath couplings, binary couplings, spin-glass
//! couplings, each fragment's initial state) gets its own ChaCha stream, so
//! resizing one family never shifts the draws of another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stream {
    /// `r_i` of the strong Ising star coupling.
    StarCouplings,
    /// Binary `±I'` couplings to the reservoir fragment.
    BinaryCouplings,
    /// Spin-glass couplings inside the reservoir fragment.
    SpinGlass,
    /// Random initial state of the strongly coupled bath fragment.
    BathState,
    /// Random initial state of the reservoir fragment.
    ReservoirState,
    /// Sampling of measurement outcomes in trajectory mode.
    Collapse,
    /// Start vector of the Lanczos iteration.
    Lanczos,
}

impl Stream {
    pub const ALL: [Stream; 7] = [
        Stream::StarCouplings,
        Stream::BinaryCouplings,
        Stream::SpinGlass,
        Stream::BathState,
        Stream::ReservoirState,
        Stream::Collapse,
        Stream::Lanczos,
    ];

    fn id(self) -> u64 {
        match self {
            Stream::StarCouplings => 1,
            Stream::BinaryCouplings => 2,
            Stream::SpinGlass => 3,
            Stream::BathState => 4,
            Stream::ReservoirState => 5,
            Stream::Collapse => 6,
            Stream::Lanczos => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::StarCouplings => "star_couplings",
            Stream::BinaryCouplings => "binary_couplings",
            Stream::SpinGlass => "spin_glass",
            Stream::BathState => "bath_state",
            Stream::ReservoirState => "reservoir_state",
            Stream::Collapse => "collapse",
            Stream::Lanczos => "lanczos",
        }
    }
}

/// Master seed plus the derivation of per-family seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed of one family: the first word of ChaCha stream `stream.id()`.
    pub fn seed_for(&self, stream: Stream) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream.id());
        rng.next_u64()
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        rng_from_seed(self.seed_for(stream))
    }
}

/// The generator every seeded routine in the crate uses.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
