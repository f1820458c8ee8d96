//! Episode loop shared by every learner: decentralized epsilon-greedy acting,
//! replay feeding, periodic training and per-episode metrics.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::baselines::{IqlLearner, VdnLearner};
use crate::central::{CentralEstimator, TeamReward};
use crate::dueling::{select_action, ActionSpec, DuelingNetwork, NetArch};
use crate::env::{EnvStep, MultiAgentEnv};
use crate::gdq::GdqLearner;
use crate::nn::AdamConfig;
use crate::replay::PerConfig;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gdq,
    Vdn,
    Iql,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gdq => "gdq",
            Algorithm::Vdn => "vdn",
            Algorithm::Iql => "iql",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gdq" => Some(Algorithm::Gdq),
            "vdn" => Some(Algorithm::Vdn),
            "iql" => Some(Algorithm::Iql),
            _ => None,
        }
    }
}

/// Which network trains first on a GDQ training tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    CentralFirst,
    AgentsFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub batch_size: usize,
    pub per: PerConfig,
    pub adam: AdamConfig,
    pub arch: NetArch,
    /// Hard sync period (training steps) for IQL/VDN target nets and the
    /// GDQ central target.
    pub target_sync_every: u64,
    /// `None` picks the algorithm default: mean for GDQ, sum for VDN.
    pub team_reward: Option<TeamReward>,
    /// GDQ: bootstrap on `V_G' + A` instead of `V_G' + (A - mean A)`.
    pub raw_aggregation: bool,
    pub update_order: UpdateOrder,
    pub central_hidden: Vec<usize>,
    pub central_per: bool,
}

impl LearnerConfig {
    pub fn new(arch: NetArch) -> Self {
        Self {
            gamma: 0.99,
            n_step: 3,
            batch_size: 64,
            per: PerConfig::default(),
            adam: AdamConfig::default(),
            arch,
            target_sync_every: 200,
            team_reward: None,
            raw_aggregation: false,
            update_order: UpdateOrder::CentralFirst,
            central_hidden: alloc::vec![64, 64],
            central_per: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(alloc::format!("gamma {} must be in (0, 1]", self.gamma)));
        }
        if self.n_step == 0 {
            return Err(Error::Config("n_step must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.target_sync_every == 0 {
            return Err(Error::Config("target_sync_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exploration, annealing and episode-length schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub train_every: u64,
    /// No training before this many environment steps.
    pub learning_starts: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_anneal_steps: u64,
    pub max_episode_steps: usize,
    pub max_epochs: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            train_every: 4,
            learning_starts: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            beta_start: 0.4,
            beta_end: 1.0,
            beta_anneal_steps: 500_000,
            max_episode_steps: 500,
            max_epochs: 1000,
        }
    }
}

fn linear(start: f64, end: f64, steps: u64, t: u64) -> f64 {
    if steps == 0 || t >= steps {
        return end;
    }
    start + (end - start) * (t as f64 / steps as f64)
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return Err(Error::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::Config("epsilon_end must not exceed epsilon_start".into()));
        }
        if !unit.contains(&self.beta_start) || !unit.contains(&self.beta_end) {
            return Err(Error::Config("beta bounds must lie in [0, 1]".into()));
        }
        if self.train_every == 0 {
            return Err(Error::Config("train_every must be >= 1".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::Config("max_episode_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        linear(self.epsilon_start, self.epsilon_end, self.epsilon_decay_steps, step)
    }

    pub fn beta(&self, step: u64) -> f64 {
        linear(self.beta_start, self.beta_end, self.beta_anneal_steps, step)
    }
}

/// One synchronized environment step as seen by a learner.
#[derive(Debug, Clone, Copy)]
pub struct TeamStep<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [Vec<usize>],
    pub rewards: &'a [f64],
    pub next_obs: &'a [Vec<f64>],
    /// Per-agent terminal flags (no bootstrap for that agent).
    pub dones: &'a [bool],
    /// Episode cut by the step cap.
    pub truncated: bool,
}

pub trait Learner {
    fn algorithm(&self) -> Algorithm;

    fn n_agents(&self) -> usize;

    /// The only network read when agent `agent` acts.
    fn policy(&self, agent: usize) -> &DuelingNetwork;

    fn policy_mut(&mut self, agent: usize) -> &mut DuelingNetwork;

    fn observe(&mut self, step: &TeamStep<'_>) -> Result<()>;

    /// One training tick. Returns the mean agent loss, or `None` while the
    /// replay buffers are too small.
    fn train(&mut self, beta: f64, rng: &mut Rng) -> Result<Option<f64>>;

    /// Whether any agent keeps a separate target network.
    fn has_agent_target_networks(&self) -> bool;

    fn central(&self) -> Option<&CentralEstimator> {
        None
    }

    fn central_mut(&mut self) -> Option<&mut CentralEstimator> {
        None
    }
}

pub fn build_learner(
    algorithm: Algorithm,
    config: &LearnerConfig,
    n_agents: usize,
    obs_dim: usize,
    spec: &ActionSpec,
    rng: &mut Rng,
) -> Result<Box<dyn Learner>> {
    config.validate()?;
    if n_agents == 0 {
        return Err(Error::Config("need at least one agent".into()));
    }
    Ok(match algorithm {
        Algorithm::Gdq => Box::new(GdqLearner::new(config, n_agents, obs_dim, spec, rng)?),
        Algorithm::Vdn => Box::new(VdnLearner::new(config, n_agents, obs_dim, spec, rng)?),
        Algorithm::Iql => Box::new(IqlLearner::new(config, n_agents, obs_dim, spec, rng)?),
    })
}

/// Counters that persist across epochs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainState {
    pub env_steps: u64,
    pub epochs: u64,
    pub train_ticks: u64,
}

/// Independent random streams of one run.
#[derive(Debug, Clone)]
pub struct RunRngs {
    pub explore: Rng,
    pub replay: Rng,
}

impl RunRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            explore: crate::rng::seeded(seed, crate::rng::stream::EXPLORE),
            replay: crate::rng::seeded(seed, crate::rng::stream::REPLAY),
        }
    }
}

/// Per-episode metrics averaged over agents.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    /// Fraction of agents that reached at least one goal and never collided.
    pub success_rate: f64,
    /// Mean per-agent cumulative reward.
    pub avg_reward: f64,
    /// Mean steps to an agent's first goal; the episode length if it had none.
    pub avg_steps: f64,
    /// Fraction of agents with at least one collision.
    pub collision_pct: f64,
    /// Mean over steps of the landmark coverage distance; NaN if the env has none.
    pub avg_landmark_distance: f64,
    pub episode_steps: usize,
    pub env_steps: u64,
    pub epsilon: f64,
    /// Mean training loss over the episode; NaN without updates.
    pub mean_loss: f64,
}

impl EpochMetrics {
    /// Every agent succeeded.
    pub fn team_success(&self) -> bool {
        self.success_rate == 1.0
    }
}

/// Accumulates per-agent event flags over one episode.
#[derive(Debug, Clone)]
pub struct EpisodeTracker {
    rewards: Vec<f64>,
    reached: Vec<bool>,
    collided: Vec<bool>,
    first_goal: Vec<Option<usize>>,
    landmark_sum: f64,
    landmark_count: usize,
    steps: usize,
}

impl EpisodeTracker {
    pub fn new(n_agents: usize) -> Self {
        Self {
            rewards: alloc::vec![0.0; n_agents],
            reached: alloc::vec![false; n_agents],
            collided: alloc::vec![false; n_agents],
            first_goal: alloc::vec![None; n_agents],
            landmark_sum: 0.0,
            landmark_count: 0,
            steps: 0,
        }
    }

    pub fn record(&mut self, step: &EnvStep) {
        self.steps += 1;
        for (i, ev) in step.events.iter().enumerate() {
            self.rewards[i] += step.rewards[i];
            if ev.collided {
                self.collided[i] = true;
            }
            if ev.reached_goal {
                self.reached[i] = true;
                self.first_goal[i].get_or_insert(self.steps);
            }
        }
        if let Some(d) = step.landmark_distance {
            self.landmark_sum += d;
            self.landmark_count += 1;
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn agent_rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn finish(&self, epoch: u64, env_steps: u64, epsilon: f64, mean_loss: f64) -> EpochMetrics {
        let n = self.rewards.len() as f64;
        let frac = |flags: &mut dyn Iterator<Item = bool>| flags.filter(|&f| f).count() as f64 / n;
        EpochMetrics {
            epoch,
            success_rate: frac(&mut self.reached.iter().zip(&self.collided).map(|(&r, &c)| r && !c)),
            avg_reward: self.rewards.iter().sum::<f64>() / n,
            avg_steps: self
                .first_goal
                .iter()
                .map(|g| g.unwrap_or(self.steps) as f64)
                .sum::<f64>()
                / n,
            collision_pct: frac(&mut self.collided.iter().copied()),
            avg_landmark_distance: if self.landmark_count == 0 {
                f64::NAN
            } else {
                self.landmark_sum / self.landmark_count as f64
            },
            episode_steps: self.steps,
            env_steps,
            epsilon,
            mean_loss,
        }
    }
}

/// Runs one training episode.
pub fn train_epoch<E: MultiAgentEnv + ?Sized>(
    learner: &mut dyn Learner,
    env: &mut E,
    schedule: &TrainSchedule,
    state: &mut TrainState,
    rngs: &mut RunRngs,
) -> Result<EpochMetrics> {
    let n = learner.n_agents();
    if env.n_agents() != n {
        return Err(Error::Dimension {
            context: "env agent count",
            expected: n,
            got: env.n_agents(),
        });
    }
    let mut obs = env.reset()?;
    let mut tracker = EpisodeTracker::new(n);
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut epsilon = schedule.epsilon(state.env_steps);
    for t in 0..schedule.max_episode_steps {
        epsilon = schedule.epsilon(state.env_steps);
        let actions = (0..n)
            .map(|i| select_action(learner.policy(i), &obs[i], epsilon, &mut rngs.explore))
            .collect::<Result<Vec<_>>>()?;
        let step = env.step(&actions)?;
        tracker.record(&step);
        let truncated = t + 1 == schedule.max_episode_steps && !step.team_done;
        learner.observe(&TeamStep {
            obs: &obs,
            actions: &actions,
            rewards: &step.rewards,
            next_obs: &step.obs,
            dones: &step.dones,
            truncated,
        })?;
        state.env_steps += 1;
        if state.env_steps >= schedule.learning_starts && state.env_steps % schedule.train_every == 0 {
            let beta = schedule.beta(state.env_steps);
            if let Some(loss) = learner.train(beta, &mut rngs.replay)? {
                loss_sum += loss;
                loss_count += 1;
                state.train_ticks += 1;
            }
        }
        obs = step.obs;
        if step.team_done {
            break;
        }
    }
    let mean_loss = if loss_count == 0 {
        f64::NAN
    } else {
        loss_sum / loss_count as f64
    };
    let metrics = tracker.finish(state.epochs, state.env_steps, epsilon, mean_loss);
    state.epochs += 1;
    Ok(metrics)
}

/// Runs one greedy episode with fixed policies. `on_step` sees every
/// environment step and the actions that produced it.
pub fn evaluate_episode<E, F>(
    policies: &[&DuelingNetwork],
    env: &mut E,
    max_steps: usize,
    epoch: u64,
    mut on_step: F,
) -> Result<EpochMetrics>
where
    E: MultiAgentEnv + ?Sized,
    F: FnMut(usize, &[Vec<usize>], &EnvStep),
{
    let n = policies.len();
    if env.n_agents() != n {
        return Err(Error::Dimension {
            context: "env agent count",
            expected: n,
            got: env.n_agents(),
        });
    }
    let mut obs = env.reset()?;
    let mut tracker = EpisodeTracker::new(n);
    // epsilon = 0 never draws from the stream
    let mut unused = crate::rng::seeded(0, 0);
    for t in 0..max_steps {
        let actions = policies
            .iter()
            .zip(&obs)
            .map(|(p, o)| select_action(p, o, 0.0, &mut unused))
            .collect::<Result<Vec<_>>>()?;
        let step = env.step(&actions)?;
        tracker.record(&step);
        on_step(t, &actions, &step);
        obs = step.obs;
        if step.team_done {
            break;
        }
    }
    Ok(tracker.finish(epoch, tracker.steps() as u64, 0.0, f64::NAN))
}
