//! Run configuration: TOML on disk, every default materialized on load.

use std::path::{Path, PathBuf};

use gdq_core::central::TeamReward;
use gdq_core::dueling::NetArch;
use gdq_core::env::nav::{LidarConfig, NavConfig, RewardConfig};
use gdq_core::nn::{Activation, AdamConfig};
use gdq_core::replay::PerConfig;
use gdq_core::train::{Algorithm, LearnerConfig, TrainSchedule, UpdateOrder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scene::{load_scene, SceneFile};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Gdq,
    Vdn,
    Iql,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::Gdq => Algorithm::Gdq,
            AlgorithmName::Vdn => Algorithm::Vdn,
            AlgorithmName::Iql => Algorithm::Iql,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Particle,
    Nav,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamRewardName {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrderName {
    CentralFirst,
    AgentsFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    pub n_agents: Option<usize>,
    /// Scene file, relative to the config file. Navigation only.
    pub scene: Option<PathBuf>,
    pub max_episode_steps: Option<usize>,
    #[serde(default)]
    pub collision_ends_episode: bool,
    #[serde(default = "defaults::goal_distance")]
    pub goal_distance: [f64; 2],
    #[serde(default = "defaults::goal_separation")]
    pub goal_separation: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::stack")]
    pub stack: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub max_epochs: u64,
    pub train_every: u64,
    pub learning_starts: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Defaults to `max_epochs * max_episode_steps`.
    pub beta_anneal_steps: Option<u64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = TrainSchedule::default();
        Self {
            max_epochs: s.max_epochs,
            train_every: s.train_every,
            learning_starts: s.learning_starts,
            epsilon_start: s.epsilon_start,
            epsilon_end: s.epsilon_end,
            epsilon_decay_steps: s.epsilon_decay_steps,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            beta_anneal_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub gamma: f64,
    pub n_step: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub per_alpha: f64,
    pub priority_epsilon: f64,
    pub target_sync_every: u64,
    /// Unset: mean for GDQ, sum for VDN.
    pub team_reward: Option<TeamRewardName>,
    pub raw_aggregation: bool,
    pub update_order: UpdateOrderName,
    pub central_hidden: Vec<usize>,
    pub central_per: bool,
    pub trunk: Option<Vec<usize>>,
    pub stream_hidden: Option<usize>,
    pub activation: Option<ActivationName>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let per = PerConfig::default();
        Self {
            gamma: 0.99,
            n_step: 3,
            batch_size: 64,
            learning_rate: AdamConfig::default().learning_rate,
            replay_capacity: per.capacity,
            per_alpha: per.alpha,
            priority_epsilon: per.priority_epsilon,
            target_sync_every: 200,
            team_reward: None,
            raw_aggregation: false,
            update_order: UpdateOrderName::CentralFirst,
            central_hidden: vec![64, 64],
            central_per: false,
            trunk: None,
            stream_hidden: None,
            activation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub smoothing_window: usize,
    pub checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            smoothing_window: 100,
            checkpoint: true,
        }
    }
}

mod defaults {
    pub fn goal_distance() -> [f64; 2] {
        [0.5, 1.5]
    }
    pub fn goal_separation() -> f64 {
        0.5
    }
    pub fn alpha() -> f64 {
        5.0
    }
    pub fn stack() -> usize {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmName,
    #[serde(default)]
    pub seed: u64,
    pub env: EnvSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn field(name: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{name}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads, materializes and validates a config file. A relative scene
    /// path is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| field("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(scene) = &cfg.env.scene {
            if scene.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.env.scene = Some(base.join(scene));
            }
        }
        cfg.materialize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills every environment-dependent default.
    pub fn materialize(&mut self) {
        let nav = self.env.kind == EnvKind::Nav;
        self.env.n_agents.get_or_insert(if nav { 2 } else { 3 });
        let steps = *self.env.max_episode_steps.get_or_insert(if nav { 500 } else { 25 });
        let s = &mut self.schedule;
        s.beta_anneal_steps.get_or_insert(s.max_epochs * steps as u64);
        let arch = if nav { NetArch::navigation() } else { NetArch::particle() };
        let l = &mut self.learner;
        l.trunk.get_or_insert(arch.trunk);
        l.stream_hidden.get_or_insert(arch.stream_hidden);
        l.activation.get_or_insert(match arch.activation {
            Activation::Tanh => ActivationName::Tanh,
            _ => ActivationName::Relu,
        });
        l.team_reward.get_or_insert(match self.algorithm {
            AlgorithmName::Vdn => TeamRewardName::Sum,
            _ => TeamRewardName::Mean,
        });
    }

    /// Desk-scale budgets replaced by the full-length settings.
    pub fn apply_paper_scale(&mut self) {
        let nav = self.env.kind == EnvKind::Nav;
        self.env.max_episode_steps = Some(if nav { 500 } else { 25 });
        self.schedule.max_epochs = if nav { 2000 } else { 10_000 };
        self.schedule.epsilon_decay_steps = 50_000;
        self.schedule.learning_starts = 1000;
        self.schedule.beta_anneal_steps = None;
        self.learner.batch_size = 64;
        self.learner.replay_capacity = 50_000;
        self.materialize();
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let n = self.n_agents();
        match self.env.kind {
            EnvKind::Particle => {
                if n == 0 || n > 8 {
                    return Err(field("env.n_agents", "particle world supports 1 to 8 agents"));
                }
            }
            EnvKind::Nav => {
                if ![2, 4, 8].contains(&n) {
                    return Err(field("env.n_agents", format!("{n} not in {{2, 4, 8}}")));
                }
                if self.env.scene.is_none() {
                    return Err(field("env.scene", "required for navigation"));
                }
                let [lo, hi] = self.env.goal_distance;
                if !(lo >= 0.0 && hi > lo) {
                    return Err(field("env.goal_distance", "needs 0 <= min < max"));
                }
                if self.env.stack == 0 {
                    return Err(field("env.stack", "must be >= 1"));
                }
            }
        }
        if self.max_episode_steps() == 0 {
            return Err(field("env.max_episode_steps", "must be >= 1"));
        }
        let s = &self.schedule;
        if s.max_epochs == 0 {
            return Err(field("schedule.max_epochs", "must be >= 1"));
        }
        if s.train_every == 0 {
            return Err(field("schedule.train_every", "must be >= 1"));
        }
        for (name, v) in [
            ("schedule.epsilon_start", s.epsilon_start),
            ("schedule.epsilon_end", s.epsilon_end),
            ("schedule.beta_start", s.beta_start),
            ("schedule.beta_end", s.beta_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(field(name, format!("{v} outside [0, 1]")));
            }
        }
        if s.epsilon_end > s.epsilon_start {
            return Err(field("schedule.epsilon_end", "exceeds epsilon_start"));
        }
        let l = &self.learner;
        if !(l.gamma > 0.0 && l.gamma <= 1.0) {
            return Err(field("learner.gamma", format!("{} outside (0, 1]", l.gamma)));
        }
        for (name, v) in [
            ("learner.n_step", l.n_step),
            ("learner.batch_size", l.batch_size),
            ("learner.replay_capacity", l.replay_capacity),
        ] {
            if v == 0 {
                return Err(field(name, "must be >= 1"));
            }
        }
        if l.batch_size > l.replay_capacity {
            return Err(field("learner.batch_size", "larger than replay_capacity"));
        }
        if !(l.learning_rate > 0.0 && l.learning_rate.is_finite()) {
            return Err(field("learner.learning_rate", "must be positive"));
        }
        if !(l.per_alpha >= 0.0) {
            return Err(field("learner.per_alpha", "must be >= 0"));
        }
        if !(l.priority_epsilon > 0.0) {
            return Err(field("learner.priority_epsilon", "must be > 0"));
        }
        if l.target_sync_every == 0 {
            return Err(field("learner.target_sync_every", "must be >= 1"));
        }
        if self.output.smoothing_window == 0 {
            return Err(field("output.smoothing_window", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.env.n_agents.unwrap_or(0)
    }

    pub fn max_episode_steps(&self) -> usize {
        self.env.max_episode_steps.unwrap_or(0)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm.into()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scene(&self) -> Result<Option<SceneFile>, HarnessError> {
        self.env.scene.as_deref().map(load_scene).transpose()
    }

    /// SHA-256 over the materialized config with the seed and the scene path
    /// blanked, followed by the scene contents. Two runs that differ only in
    /// seed share a hash.
    pub fn hash(&self) -> Result<String, HarnessError> {
        let mut canon = self.clone();
        canon.seed = 0;
        canon.env.scene = None;
        let mut h = Sha256::new();
        h.update(canon.to_toml().as_bytes());
        if let Some(scene) = self.scene()? {
            h.update(b"\n#scene\n");
            h.update(scene.canonical().as_bytes());
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn schedule(&self) -> TrainSchedule {
        let s = &self.schedule;
        TrainSchedule {
            train_every: s.train_every,
            learning_starts: s.learning_starts,
            epsilon_start: s.epsilon_start,
            epsilon_end: s.epsilon_end,
            epsilon_decay_steps: s.epsilon_decay_steps,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            beta_anneal_steps: s.beta_anneal_steps.unwrap_or(0),
            max_episode_steps: self.max_episode_steps(),
            max_epochs: s.max_epochs,
        }
    }

    pub fn learner(&self) -> LearnerConfig {
        let l = &self.learner;
        let arch = NetArch {
            trunk: l.trunk.clone().unwrap_or_default(),
            stream_hidden: l.stream_hidden.unwrap_or(64),
            activation: match l.activation {
                Some(ActivationName::Tanh) => Activation::Tanh,
                _ => Activation::ReLU,
            },
        };
        let mut c = LearnerConfig::new(arch);
        c.gamma = l.gamma;
        c.n_step = l.n_step;
        c.batch_size = l.batch_size;
        c.per = PerConfig {
            capacity: l.replay_capacity,
            alpha: l.per_alpha,
            priority_epsilon: l.priority_epsilon,
        };
        c.adam.learning_rate = l.learning_rate;
        c.target_sync_every = l.target_sync_every;
        c.team_reward = l.team_reward.map(|t| match t {
            TeamRewardName::Mean => TeamReward::Mean,
            TeamRewardName::Sum => TeamReward::Sum,
        });
        c.raw_aggregation = l.raw_aggregation;
        c.update_order = match l.update_order {
            UpdateOrderName::CentralFirst => UpdateOrder::CentralFirst,
            UpdateOrderName::AgentsFirst => UpdateOrder::AgentsFirst,
        };
        c.central_hidden = l.central_hidden.clone();
        c.central_per = l.central_per;
        c
    }

    pub fn nav(&self) -> NavConfig {
        let e = &self.env;
        NavConfig {
            n_robots: self.n_agents(),
            lidar: LidarConfig::default(),
            stack: e.stack,
            reward: RewardConfig {
                alpha: e.alpha,
                ..RewardConfig::default()
            },
            goal_separation: e.goal_separation,
            goal_distance: (e.goal_distance[0], e.goal_distance[1]),
            collision_ends_episode: e.collision_ends_episode,
            ..NavConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
algorithm = "gdq"
[env]
kind = "particle"
"#;

    #[test]
    fn defaults_are_materialized() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.materialize();
        assert_eq!(c.n_agents(), 3);
        assert_eq!(c.max_episode_steps(), 25);
        assert_eq!(c.learner.trunk.as_deref(), Some(&[64][..]));
        assert_eq!(c.learner.team_reward, Some(TeamRewardName::Mean));
        assert_eq!(c.schedule.beta_anneal_steps, Some(25_000));
        // the written form parses back to the same config
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn hash_ignores_seed_only() {
        let mut a = RunConfig::from_toml(MINIMAL).unwrap();
        a.materialize();
        let mut b = a.clone();
        b.seed = 42;
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.learner.gamma = 0.95;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("algorithm = \"gdq\"\nbogus = 1\n[env]\nkind = \"nav\"").is_err());
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.materialize();
        c.learner.gamma = 1.5;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("learner.gamma"), "{err}");
        c.learner.gamma = 0.99;
        c.env.kind = EnvKind::Nav;
        c.env.n_agents = Some(3);
        assert!(c.validate().unwrap_err().to_string().contains("env.n_agents"));
    }
}
