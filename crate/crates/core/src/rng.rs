//! Per-purpose random streams split from one root seed.
//!
//! Every purpose gets its own ChaCha8 stream id under the same key, so
//! drawing more from one stream (say, extra montage latents) never shifts
//! another. A stream's full state is `(seed, purpose, word_pos)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Task = 2,
    Latent = 3,
    Interpolation = 4,
    Split = 5,
    Eval = 6,
    Sample = 7,
    Data = 8,
}

impl Purpose {
    pub fn id(self) -> u64 {
        self as u64
    }
}

/// The stream for `purpose`, positioned at its start.
pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.id());
    rng
}

/// The stream for `purpose`, positioned at `word_pos`.
pub fn stream_at(seed: u64, purpose: Purpose, word_pos: u128) -> ChaCha8Rng {
    let mut rng = stream(seed, purpose);
    rng.set_word_pos(word_pos);
    rng
}

/// Latent and interpolation-weight draws used inside adaptation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerRngs {
    pub latent: ChaCha8Rng,
    pub interpolation: ChaCha8Rng,
}

impl InnerRngs {
    pub fn new(seed: u64) -> Self {
        InnerRngs { latent: stream(seed, Purpose::Latent), interpolation: stream(seed, Purpose::Interpolation) }
    }
}

/// All streams consumed by meta-training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainRngs {
    seed: u64,
    pub task: ChaCha8Rng,
    pub inner: InnerRngs,
}

impl TrainRngs {
    pub fn new(seed: u64) -> Self {
        TrainRngs { seed, task: stream(seed, Purpose::Task), inner: InnerRngs::new(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Word positions of the task, latent and interpolation streams.
    pub fn positions(&self) -> [u128; 3] {
        [self.task.get_word_pos(), self.inner.latent.get_word_pos(), self.inner.interpolation.get_word_pos()]
    }

    pub fn restore(seed: u64, positions: [u128; 3]) -> Self {
        TrainRngs {
            seed,
            task: stream_at(seed, Purpose::Task, positions[0]),
            inner: InnerRngs {
                latent: stream_at(seed, Purpose::Latent, positions[1]),
                interpolation: stream_at(seed, Purpose::Interpolation, positions[2]),
            },
        }
    }
}
