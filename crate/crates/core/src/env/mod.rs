//! Seeded multi-agent environments.

pub mod nav;
pub mod particle;

use alloc::vec::Vec;

use crate::dueling::ActionSpec;
use crate::Result;

/// What happened to one agent during a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentEvent {
    pub collided: bool,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Per-agent terminal flag for the transition just taken.
    pub dones: Vec<bool>,
    /// The whole episode is over.
    pub team_done: bool,
    pub events: Vec<AgentEvent>,
    /// Mean over landmarks of the nearest-agent distance, where applicable.
    pub landmark_distance: Option<f64>,
    /// `(x, y, heading)` per agent after the step; heading is 0 when the
    /// world has none.
    pub poses: Vec<[f64; 3]>,
}

pub trait MultiAgentEnv {
    fn n_agents(&self) -> usize;

    /// Length of one agent's observation vector.
    fn obs_dim(&self) -> usize;

    fn action_spec(&self) -> &ActionSpec;

    fn reset(&mut self) -> Result<Vec<Vec<f64>>>;

    /// `actions[i]` holds one index per action branch of agent `i`.
    fn step(&mut self, actions: &[Vec<usize>]) -> Result<EnvStep>;
}

pub(crate) fn check_actions(spec: &ActionSpec, n_agents: usize, actions: &[Vec<usize>]) -> Result<()> {
    if actions.len() != n_agents {
        return Err(crate::Error::Dimension {
            context: "actions per agent",
            expected: n_agents,
            got: actions.len(),
        });
    }
    let sizes = spec.sizes();
    for a in actions {
        if a.len() != sizes.len() || a.iter().zip(&sizes).any(|(&x, &n)| x >= n) {
            return Err(crate::Error::Config(alloc::format!("action {a:?} outside {sizes:?}")));
        }
    }
    Ok(())
}
