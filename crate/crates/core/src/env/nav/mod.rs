//! Multi-robot mapless navigation: differential-drive discs with a planar
//! lidar, each chasing its own goal in a shared arena.

pub mod geometry;
mod lidar;
mod scene;

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng as _;

pub use self::lidar::{scan, LidarConfig};
pub use self::scene::{Pose, Scene};
use self::geometry::{distance, wrap_angle};
use super::{check_actions, AgentEvent, EnvStep, MultiAgentEnv};
use crate::dueling::ActionSpec;
use crate::rng::{seeded, stream, Rng};
use crate::{Error, Result};

const GOAL_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// Scale of the progress term.
    pub alpha: f64,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub collision_reward: f64,
    /// Goal counts as reached within this distance (m).
    pub goal_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            step_penalty: 0.005,
            goal_reward: 1.0,
            collision_reward: -1.0,
            goal_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavEvent {
    None,
    Goal,
    Collision,
}

/// Collision first, then goal, otherwise progress minus a step cost.
pub fn nav_reward(d_prev: f64, d_now: f64, collided: bool, cfg: &RewardConfig) -> (f64, NavEvent) {
    if collided {
        (cfg.collision_reward, NavEvent::Collision)
    } else if d_now <= cfg.goal_threshold {
        (cfg.goal_reward, NavEvent::Goal)
    } else {
        (cfg.alpha * (d_prev - d_now) - cfg.step_penalty, NavEvent::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavConfig {
    pub n_robots: usize,
    pub robot_radius: f64,
    pub dt: f64,
    pub lidar: LidarConfig,
    /// Number of most recent frames concatenated into one observation.
    pub stack: usize,
    pub reward: RewardConfig,
    /// Minimum pairwise distance between live goals (m).
    pub goal_separation: f64,
    /// Range of the distance between a robot and a freshly drawn goal (m).
    pub goal_distance: (f64, f64),
    /// A collision ends the episode for everyone instead of only resetting
    /// the colliding robot.
    pub collision_ends_episode: bool,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            n_robots: 2,
            robot_radius: 0.105,
            dt: 0.05,
            lidar: LidarConfig::default(),
            stack: 3,
            reward: RewardConfig::default(),
            goal_separation: 0.5,
            goal_distance: (0.5, 1.5),
            collision_ends_episode: false,
        }
    }
}

impl NavConfig {
    pub fn frame_dim(&self) -> usize {
        self.lidar.beams + 2
    }
}

#[derive(Debug, Clone)]
pub struct NavWorld {
    config: NavConfig,
    scene: Scene,
    spec: ActionSpec,
    poses: Vec<Pose>,
    goals: Vec<[f64; 2]>,
    prev_dist: Vec<f64>,
    frames: Vec<VecDeque<Vec<f64>>>,
    goal_rngs: Vec<Rng>,
}

impl NavWorld {
    /// Goal sequences come from one stream per robot derived from `seed`, so
    /// two worlds built with the same seed draw the same candidates.
    pub fn new(config: NavConfig, scene: Scene, seed: u64) -> Result<Self> {
        if config.n_robots == 0 || config.stack == 0 || config.lidar.beams == 0 {
            return Err(Error::Config("navigation needs robots, beams and a stack of at least 1".into()));
        }
        let (lo, hi) = config.goal_distance;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::Config(alloc::format!("goal distance range ({lo}, {hi}) is empty")));
        }
        scene.validate(config.n_robots, config.robot_radius)?;
        let n = config.n_robots;
        Ok(Self {
            spec: ActionSpec::differential_drive(),
            poses: scene.starts[..n].to_vec(),
            goals: alloc::vec![[0.0; 2]; n],
            prev_dist: alloc::vec![0.0; n],
            frames: alloc::vec![VecDeque::new(); n],
            goal_rngs: (0..n).map(|i| seeded(seed, stream::robot_goals(i))).collect(),
            config,
            scene,
        })
    }

    pub fn config(&self) -> &NavConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn goals(&self) -> &[[f64; 2]] {
        &self.goals
    }

    pub fn goal_distance(&self, i: usize) -> f64 {
        distance(self.poses[i].position(), self.goals[i])
    }

    /// Overrides a robot pose; the caller is responsible for keeping it free.
    pub fn set_pose(&mut self, i: usize, pose: Pose) {
        self.poses[i] = pose;
        self.prev_dist[i] = self.goal_distance(i);
    }

    pub fn set_goal(&mut self, i: usize, goal: [f64; 2]) {
        self.goals[i] = goal;
        self.prev_dist[i] = self.goal_distance(i);
    }

    /// Rejection-samples a new goal for robot `i`: inside free space with a
    /// robot-radius margin, apart from the other live goals and within the
    /// configured distance of the robot.
    pub fn spawn_goal(&mut self, i: usize) -> Result<[f64; 2]> {
        let (lo, hi) = self.config.goal_distance;
        let margin = self.config.robot_radius;
        let (min, max) = match self.scene.arena {
            geometry::Shape::Rect { min, max } => (min, max),
            geometry::Shape::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        };
        let here = self.poses[i].position();
        for _ in 0..GOAL_ATTEMPTS {
            let rng = &mut self.goal_rngs[i];
            let g = [rng.gen_range(min[0]..max[0]), rng.gen_range(min[1]..max[1])];
            let d = distance(g, here);
            let apart = self
                .goals
                .iter()
                .enumerate()
                .all(|(j, &o)| j == i || distance(o, g) >= self.config.goal_separation);
            if d >= lo && d <= hi && apart && self.scene.is_free(g, margin) {
                self.goals[i] = g;
                self.prev_dist[i] = d;
                return Ok(g);
            }
        }
        Err(Error::Placement {
            attempts: GOAL_ATTEMPTS,
            scene: alloc::format!("{} (goal for robot {i})", self.scene.name),
        })
    }

    fn others(&self, i: usize) -> Vec<[f64; 2]> {
        self.poses
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| p.position())
            .collect()
    }

    /// Lidar ranges of robot `i` in metres.
    pub fn lidar(&self, i: usize) -> Vec<f64> {
        scan(&self.scene, self.poses[i], &self.others(i), self.config.robot_radius, &self.config.lidar)
    }

    /// Current single frame of robot `i`: normalized ranges, goal distance
    /// over the arena diagonal, relative goal bearing over pi.
    pub fn frame(&self, i: usize) -> Vec<f64> {
        let max = self.config.lidar.max_range;
        let mut f: Vec<f64> = self.lidar(i).into_iter().map(|r| r / max).collect();
        let p = self.poses[i];
        let g = self.goals[i];
        f.push((self.goal_distance(i) / self.scene.diagonal()).min(1.0));
        let bearing = libm::atan2(g[1] - p.y, g[0] - p.x);
        f.push(wrap_angle(bearing - p.heading) / core::f64::consts::PI);
        f
    }

    fn push_frame(&mut self, i: usize, fresh: bool) {
        let f = self.frame(i);
        let stack = &mut self.frames[i];
        if fresh {
            stack.clear();
            for _ in 0..self.config.stack {
                stack.push_back(f.clone());
            }
        } else {
            stack.pop_front();
            stack.push_back(f);
        }
    }

    fn observation(&self, i: usize) -> Vec<f64> {
        self.frames[i].iter().flatten().copied().collect()
    }

    fn robot_collides(&self, i: usize) -> bool {
        let p = self.poses[i].position();
        let r = self.config.robot_radius;
        self.scene.disc_collides(p, r)
            || self
                .poses
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && distance(q.position(), p) < 2.0 * r)
    }
}

impl MultiAgentEnv for NavWorld {
    fn n_agents(&self) -> usize {
        self.config.n_robots
    }

    fn obs_dim(&self) -> usize {
        self.config.stack * self.config.frame_dim()
    }

    fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    fn reset(&mut self) -> Result<Vec<Vec<f64>>> {
        let n = self.config.n_robots;
        self.poses.copy_from_slice(&self.scene.starts[..n]);
        // Park every goal far away so separation checks only see goals
        // already drawn in this reset.
        self.goals.iter_mut().for_each(|g| *g = [f64::INFINITY; 2]);
        for i in 0..n {
            self.spawn_goal(i)?;
        }
        for i in 0..n {
            self.push_frame(i, true);
        }
        Ok((0..n).map(|i| self.observation(i)).collect())
    }

    fn step(&mut self, actions: &[Vec<usize>]) -> Result<EnvStep> {
        let n = self.config.n_robots;
        check_actions(&self.spec, n, actions)?;
        let dt = self.config.dt;
        for (pose, a) in self.poses.iter_mut().zip(actions) {
            let w = self.spec.branches()[0].values[a[0]];
            let v = self.spec.branches()[1].values[a[1]];
            pose.heading = wrap_angle(pose.heading + w * dt);
            pose.x += v * dt * libm::cos(pose.heading);
            pose.y += v * dt * libm::sin(pose.heading);
        }
        let collided: Vec<bool> = (0..n).map(|i| self.robot_collides(i)).collect();
        let mut rewards = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        let mut fresh = alloc::vec![false; n];
        for i in 0..n {
            let d_now = self.goal_distance(i);
            let (r, ev) = nav_reward(self.prev_dist[i], d_now, collided[i], &self.config.reward);
            rewards.push(r);
            events.push(AgentEvent {
                collided: ev == NavEvent::Collision,
                reached_goal: ev == NavEvent::Goal,
            });
            dones.push(ev != NavEvent::None);
            self.prev_dist[i] = d_now;
        }
        for i in 0..n {
            if events[i].collided {
                self.poses[i] = self.scene.starts[i];
                fresh[i] = true;
                self.spawn_goal(i)?;
            } else if events[i].reached_goal {
                self.spawn_goal(i)?;
            }
        }
        for i in 0..n {
            self.push_frame(i, fresh[i]);
        }
        let team_done = self.config.collision_ends_episode && collided.iter().any(|&c| c);
        Ok(EnvStep {
            obs: (0..n).map(|i| self.observation(i)).collect(),
            rewards,
            dones,
            team_done,
            events,
            landmark_distance: None,
            poses: self.poses.iter().map(|p| [p.x, p.y, p.heading]).collect(),
        })
    }
}
