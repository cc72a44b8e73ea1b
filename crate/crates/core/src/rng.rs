//! Deterministic splittable RNG streams.
//!
//! Every (module, purpose) pair draws from its own stream so adding draws in
//! one module never shifts another. Identical (seed, stream) yields the same
//! sequence on every platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the top-level consumers. Sub-streams are derived with
/// [`RngStream::substream`].
pub mod streams {
    pub const DATAGEN: u64 = 1;
    pub const TRAIN_INIT: u64 = 2;
    pub const TRAIN_BATCH: u64 = 3;
    pub const MPC: u64 = 4;
    pub const BENCH: u64 = 5;
    pub const VALUE_MAP: u64 = 6;
    pub const EPISODE: u64 = 7;
}

/// A (seed, stream id) pair naming one reproducible draw sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derive a child stream; distinct `k` give decorrelated sequences while
    /// staying a pure function of (seed, stream, k).
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: self
                .stream
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(k.wrapping_add(1)),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}
