//! Experience replay: n-step accumulation, a sum tree, and prioritized and
//! uniform ring buffers.

mod nstep;
mod prioritized;
mod sum_tree;
mod uniform;

pub use nstep::{NStepAccumulator, Step, Transition};
pub use prioritized::{PerConfig, PrioritizedReplay, Sampled};
pub use sum_tree::SumTree;
pub use uniform::UniformReplay;
