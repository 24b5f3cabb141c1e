//! Seeded random streams.
//!
//! Every stochastic component (weight init, nomination, replay sampling,
//! policy selection) draws from its own ChaCha stream derived from the run
//! seed, so results do not depend on the order in which components run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers. The policy index is folded into the low bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    QInit(usize),
    QPolicy(usize),
    WInit(usize),
    WPolicy(usize),
    Selection,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::QInit(i) => (1 << 32) | i as u64,
            Stream::QPolicy(i) => (2 << 32) | i as u64,
            Stream::WInit(i) => (3 << 32) | i as u64,
            Stream::WPolicy(i) => (4 << 32) | i as u64,
            Stream::Selection => 5 << 32,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
