//! Cooperative navigation in a square particle world: agents must spread
//! over as many landmarks while avoiding each other.

use alloc::vec::Vec;

use rand::Rng as _;

use super::{check_actions, AgentEvent, EnvStep, MultiAgentEnv};
use crate::dueling::ActionSpec;
use crate::rng::Rng;
use crate::{Error, Result};

const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub n_agents: usize,
    pub n_landmarks: usize,
    pub agent_radius: f64,
    /// Half-width of the square arena centred on the origin.
    pub bound: f64,
    pub dt: f64,
    pub damping: f64,
    pub acceleration: f64,
    pub max_speed: f64,
    /// Penalty per overlapping neighbour and step.
    pub collision_penalty: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            n_agents: 3,
            n_landmarks: 3,
            agent_radius: 0.15,
            bound: 1.0,
            dt: 0.1,
            damping: 0.25,
            acceleration: 5.0,
            max_speed: 2.0,
            collision_penalty: 1.0,
        }
    }
}

/// Five moves: no-op, +x, -x, +y, -y.
const MOVES: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

#[derive(Debug, Clone)]
pub struct ParticleWorld {
    config: ParticleConfig,
    spec: ActionSpec,
    pos: Vec<[f64; 2]>,
    vel: Vec<[f64; 2]>,
    landmarks: Vec<[f64; 2]>,
    rng: Rng,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

impl ParticleWorld {
    pub fn new(config: ParticleConfig, rng: Rng) -> Result<Self> {
        if config.n_agents == 0 || config.n_landmarks == 0 {
            return Err(Error::Config("particle world needs agents and landmarks".into()));
        }
        if !(config.dt > 0.0 && (0.0..1.0).contains(&config.damping) && config.bound > config.agent_radius) {
            return Err(Error::Config("invalid particle physics parameters".into()));
        }
        Ok(Self {
            spec: ActionSpec::discrete("move", MOVES.len())?,
            pos: alloc::vec![[0.0; 2]; config.n_agents],
            vel: alloc::vec![[0.0; 2]; config.n_agents],
            landmarks: alloc::vec![[0.0; 2]; config.n_landmarks],
            config,
            rng,
        })
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.pos
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.vel
    }

    pub fn landmarks(&self) -> &[[f64; 2]] {
        &self.landmarks
    }

    /// Places agents and landmarks directly (velocities zeroed).
    pub fn set_state(&mut self, agents: &[[f64; 2]], landmarks: &[[f64; 2]]) -> Result<()> {
        if agents.len() != self.config.n_agents || landmarks.len() != self.config.n_landmarks {
            return Err(Error::Config("state size does not match the world".into()));
        }
        self.pos.copy_from_slice(agents);
        self.landmarks.copy_from_slice(landmarks);
        self.vel.iter_mut().for_each(|v| *v = [0.0; 2]);
        Ok(())
    }

    fn sample_apart(&mut self, placed: &[[f64; 2]], min_gap: f64) -> Result<[f64; 2]> {
        let b = self.config.bound;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = [self.rng.gen_range(-b..b), self.rng.gen_range(-b..b)];
            if placed.iter().all(|&q| dist(p, q) > min_gap) {
                return Ok(p);
            }
        }
        Err(Error::Placement {
            attempts: PLACEMENT_ATTEMPTS,
            scene: alloc::format!("particle world, bound {b}, {} agents", self.config.n_agents),
        })
    }

    /// Observation of agent `i`: velocity / max speed, position, landmark
    /// offsets / 2, other-agent offsets / 2.
    pub fn observation(&self, i: usize) -> Vec<f64> {
        let c = &self.config;
        let scale = 1.0 / (2.0 * c.bound);
        let mut o = Vec::with_capacity(self.obs_dim());
        o.extend(self.vel[i].iter().map(|v| v / c.max_speed));
        o.extend(self.pos[i].iter().map(|p| p / c.bound));
        for l in &self.landmarks {
            o.push((l[0] - self.pos[i][0]) * scale);
            o.push((l[1] - self.pos[i][1]) * scale);
        }
        for (j, p) in self.pos.iter().enumerate() {
            if j != i {
                o.push((p[0] - self.pos[i][0]) * scale);
                o.push((p[1] - self.pos[i][1]) * scale);
            }
        }
        o
    }

    /// `sum_l min_i |x_i - l|`.
    pub fn coverage_distance(&self) -> f64 {
        self.landmarks
            .iter()
            .map(|&l| self.pos.iter().map(|&p| dist(p, l)).fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// Number of other agents overlapping agent `i`.
    pub fn contacts(&self, i: usize) -> usize {
        let reach = 2.0 * self.config.agent_radius;
        (0..self.pos.len())
            .filter(|&j| j != i && dist(self.pos[i], self.pos[j]) < reach)
            .count()
    }

    /// Per-agent rewards for the current state.
    pub fn rewards(&self) -> Vec<f64> {
        let shared = -self.coverage_distance();
        (0..self.pos.len())
            .map(|i| shared - self.config.collision_penalty * self.contacts(i) as f64)
            .collect()
    }

    fn all_observations(&self) -> Vec<Vec<f64>> {
        (0..self.pos.len()).map(|i| self.observation(i)).collect()
    }
}

impl MultiAgentEnv for ParticleWorld {
    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn obs_dim(&self) -> usize {
        4 + 2 * self.config.n_landmarks + 2 * (self.config.n_agents - 1)
    }

    fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    fn reset(&mut self) -> Result<Vec<Vec<f64>>> {
        let gap = 2.0 * self.config.agent_radius;
        let mut agents = Vec::with_capacity(self.config.n_agents);
        for _ in 0..self.config.n_agents {
            let p = self.sample_apart(&agents, gap)?;
            agents.push(p);
        }
        let mut landmarks = Vec::with_capacity(self.config.n_landmarks);
        for _ in 0..self.config.n_landmarks {
            let p = self.sample_apart(&landmarks, gap)?;
            landmarks.push(p);
        }
        self.pos = agents;
        self.landmarks = landmarks;
        self.vel.iter_mut().for_each(|v| *v = [0.0; 2]);
        Ok(self.all_observations())
    }

    fn step(&mut self, actions: &[Vec<usize>]) -> Result<EnvStep> {
        check_actions(&self.spec, self.config.n_agents, actions)?;
        let c = self.config.clone();
        for (i, a) in actions.iter().enumerate() {
            let m = MOVES[a[0]];
            let v = &mut self.vel[i];
            for k in 0..2 {
                v[k] = v[k] * (1.0 - c.damping) + m[k] * c.acceleration * c.dt;
            }
            let speed = libm::hypot(v[0], v[1]);
            if speed > c.max_speed {
                v[0] *= c.max_speed / speed;
                v[1] *= c.max_speed / speed;
            }
            let p = &mut self.pos[i];
            for k in 0..2 {
                p[k] += v[k] * c.dt;
                if p[k] > c.bound || p[k] < -c.bound {
                    p[k] = p[k].clamp(-c.bound, c.bound);
                    v[k] = 0.0;
                }
            }
        }
        let rewards = self.rewards();
        let events = (0..c.n_agents)
            .map(|i| AgentEvent {
                collided: self.contacts(i) > 0,
                reached_goal: self.landmarks.iter().any(|&l| dist(self.pos[i], l) <= c.agent_radius),
            })
            .collect();
        Ok(EnvStep {
            obs: self.all_observations(),
            rewards,
            dones: alloc::vec![false; c.n_agents],
            team_done: false,
            events,
            landmark_distance: Some(self.coverage_distance() / c.n_landmarks as f64),
            poses: self.pos.iter().map(|p| [p[0], p[1], 0.0]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn world(seed: u64) -> ParticleWorld {
        ParticleWorld::new(ParticleConfig::default(), seeded(seed, 1)).unwrap()
    }

    #[test]
    fn reset_layout_and_observation_length() {
        let mut w = world(0);
        let obs = w.reset().unwrap();
        assert_eq!(w.obs_dim(), 14);
        assert!(obs.iter().all(|o| o.len() == 14));
        let p = w.positions();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(dist(p[i], p[j]) > 0.3);
            }
        }
    }

    #[test]
    fn same_seed_same_placements() {
        let (mut a, mut b) = (world(5), world(5));
        assert_eq!(a.reset().unwrap(), b.reset().unwrap());
        assert_eq!(a.landmarks(), b.landmarks());
    }

    #[test]
    fn agents_on_landmarks_have_zero_distance() {
        let mut w = world(1);
        let spots = [[0.5, 0.5], [-0.5, 0.5], [0.0, -0.5]];
        w.set_state(&spots, &spots).unwrap();
        assert_eq!(w.coverage_distance(), 0.0);
        assert_eq!(w.rewards(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn overlapping_agents_are_both_penalised() {
        let mut w = world(2);
        w.set_state(&[[0.0, 0.0], [0.1, 0.0], [0.8, 0.8]], &[[0.0, 0.0], [0.1, 0.0], [0.8, 0.8]])
            .unwrap();
        let r = w.rewards();
        assert_eq!(r, [-1.0, -1.0, 0.0]);
    }

    #[test]
    fn moving_away_from_a_landmark_lowers_reward() {
        let mut w = world(3);
        let landmarks = [[0.5, 0.5], [-0.5, 0.5], [0.0, -0.5]];
        w.set_state(&[[0.4, 0.5], [-0.5, 0.5], [0.0, -0.5]], &landmarks).unwrap();
        let before = w.rewards()[0];
        // agent 0 pushes -x (away), the others idle
        let step = w.step(&[alloc::vec![2], alloc::vec![0], alloc::vec![0]]).unwrap();
        assert!(step.rewards[0] < before);
    }

    #[test]
    fn observations_are_normalised() {
        let mut w = world(4);
        w.reset().unwrap();
        let mut rng = seeded(4, 9);
        for _ in 0..200 {
            let a: Vec<Vec<usize>> = (0..3).map(|_| alloc::vec![rng.gen_range(0..5)]).collect();
            let s = w.step(&a).unwrap();
            assert!(s.obs.iter().flatten().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn rejects_bad_actions() {
        let mut w = world(0);
        w.reset().unwrap();
        assert!(w.step(&[alloc::vec![5], alloc::vec![0], alloc::vec![0]]).is_err());
        assert!(w.step(&[alloc::vec![0]]).is_err());
    }
}
