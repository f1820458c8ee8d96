//! Seeded random streams.
//!
//! Every run derives independent ChaCha streams from one seed so that, for
//! example, exploration noise never perturbs the goal sequence of an env.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

/// Stream ids used by the training loop.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const EXPLORE: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const GOALS: u64 = 4;

    /// Goal stream of one robot; offset so it never meets the ids above.
    pub const fn robot_goals(robot: usize) -> u64 {
        1_000 + robot as u64
    }
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
