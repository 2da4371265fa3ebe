//! Deterministic random-stream derivation.
//!
//! One master seed fans out into independent named streams (one for the
//! environment, one per agent, one for the shared model initialization)
//! so that agents can run in parallel without changing results relative
//! to sequential execution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical consumers of randomness within one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Shared model initialization broadcast to every agent.
    Init,
    /// Training environment: geometry, shadowing, fading.
    TrainEnv,
    /// Evaluation environment (fresh episodes, disjoint from training).
    EvalEnv,
    /// Per-agent exploration / policy sampling.
    Agent(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 0,
            Stream::TrainEnv => 1,
            Stream::EvalEnv => 2,
            Stream::Agent(i) => 16 + i as u64,
        }
    }
}

/// Derives the RNG for a named stream from the master seed.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
