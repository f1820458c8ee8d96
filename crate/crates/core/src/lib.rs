//! Multi-agent global dueling Q-learning.
//!
//! The crate is `no_std` with `alloc`. It contains everything that does not
//! touch the file system or a clock:
//!
//! - [`nn`]: dense layers, batched forward/backward, Adam, a flat weight codec.
//! - [`dueling`]: agent Q-networks with a state-value stream and one advantage
//!   stream per action branch.
//! - [`replay`]: sum tree, n-step accumulation, prioritized and uniform buffers.
//! - [`central`]: the joint state-value estimator and its target copy.
//! - [`gdq`], [`baselines`]: the learners (GDQ, IQL, VDN) and the IGM checker.
//! - [`env`]: the particle cooperative-navigation world and the lidar
//!   navigation world.
//! - [`train`]: the epoch loop, schedules and per-epoch metrics.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod central;
pub mod dueling;
pub mod env;
mod error;
pub mod gdq;
pub mod nn;
pub mod replay;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
