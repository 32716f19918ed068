//! Seeded uniform streams and seed vectors.
//!
//! A [`SeedVector`] is the finite encoding of a representation's intrinsic
//! randomness: stream `k` of a simulation is rebuilt from seed `k`, so the
//! vector fully determines every draw the simulator makes.
//!
//! The generator is ChaCha8 keyed through `SeedableRng::seed_from_u64`.
//! Golden outputs depend on this choice; do not change it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const SEED_MIN: u64 = 1;
pub const SEED_MAX: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RngError {
    #[error("seed {0} outside 1..=1000000000")]
    SeedOutOfRange(u64),
    #[error("seed vector has {got} slots, expected {expected}")]
    SlotCount { expected: usize, got: usize },
}

fn check_seed(seed: u64) -> Result<u64, RngError> {
    if (SEED_MIN..=SEED_MAX).contains(&seed) {
        Ok(seed)
    } else {
        Err(RngError::SeedOutOfRange(seed))
    }
}

/// A replayable stream of uniforms on the open interval (0, 1).
#[derive(Debug, Clone)]
pub struct UniformStream {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl UniformStream {
    pub fn from_seed(seed: u64) -> Result<Self, RngError> {
        let seed = check_seed(seed)?;
        Ok(Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_count(&self) -> u64 {
        self.draws
    }

    /// Next uniform in (0, 1), 53-bit resolution. Zero is rejected and redrawn.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        loop {
            let bits = self.rng.next_u64() >> 11;
            if bits != 0 {
                self.draws += 1;
                return bits as f64 * SCALE;
            }
        }
    }

    /// Uniform integer on `SEED_MIN..=SEED_MAX`.
    pub fn next_seed(&mut self) -> u64 {
        let u = self.next_uniform();
        // u < 1, so the floor is at most SEED_MAX - 1.
        SEED_MIN + (u * SEED_MAX as f64).floor() as u64
    }
}

/// One seed per stream slot of a representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedVector(Vec<u64>);

impl SeedVector {
    pub fn new(seeds: Vec<u64>) -> Result<Self, RngError> {
        for &s in &seeds {
            check_seed(s)?;
        }
        Ok(Self(seeds))
    }

    /// Draws `n_slots` seeds from `master`.
    pub fn draw(master: &mut UniformStream, n_slots: usize) -> Self {
        Self((0..n_slots).map(|_| master.next_seed()).collect())
    }

    pub fn seeds(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fresh streams, one per slot, in slot order.
    pub fn streams(&self) -> Vec<UniformStream> {
        self.0
            .iter()
            .map(|&s| UniformStream::from_seed(s).expect("seed vector holds validated seeds"))
            .collect()
    }

    pub fn expect_len(&self, expected: usize) -> Result<(), RngError> {
        if self.0.len() == expected {
            Ok(())
        } else {
            Err(RngError::SlotCount {
                expected,
                got: self.0.len(),
            })
        }
    }
}

/// Alias kept close to the usual name of the operation.
pub fn draw_seed_vector(master: &mut UniformStream, n_slots: usize) -> SeedVector {
    SeedVector::draw(master, n_slots)
}
