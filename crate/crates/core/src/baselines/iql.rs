use alloc::vec::Vec;

use crate::dueling::{argmax, weighted_td_loss, ActionSpec, DuelingNetwork};
use crate::nn::{AdamState, Matrix};
use crate::replay::{NStepAccumulator, PerConfig, PrioritizedReplay, Step, Transition};
use crate::rng::Rng;
use crate::train::{Algorithm, Learner, LearnerConfig, TeamStep};
use crate::{Error, Result};

/// Per-branch `R_n + gamma^n Q_target(s', argmax_a Q_online(s', a))`.
pub fn double_dqn_targets(
    online: &DuelingNetwork,
    target: &DuelingNetwork,
    batch: &[&Transition],
) -> Result<Vec<Vec<f64>>> {
    let next = Matrix::from_rows(online.in_dim(), batch.iter().map(|t| t.next_obs.as_slice()))?;
    let q_on = online.predict_batch(&next)?.q_values();
    let q_tg = target.predict_batch(&next)?.q_values();
    let mut out = Vec::with_capacity(batch.len());
    for (j, t) in batch.iter().enumerate() {
        let ys: Vec<f64> = q_on
            .iter()
            .zip(&q_tg)
            .map(|(on, tg)| {
                if t.done {
                    t.n_step_return
                } else {
                    t.n_step_return + t.gamma_n * tg.get(j, argmax(on.row(j)))
                }
            })
            .collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::fault("iql", "non-finite td target"));
        }
        out.push(ys);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IqlAgent {
    net: DuelingNetwork,
    target: DuelingNetwork,
    replay: PrioritizedReplay<Transition>,
    nstep: NStepAccumulator,
    optimizer: AdamState,
    train_steps: u64,
    sync_every: u64,
}

impl IqlAgent {
    pub fn new(net: DuelingNetwork, per: PerConfig, n_step: usize, gamma: f64, optimizer: AdamState, sync_every: u64) -> Result<Self> {
        Ok(Self {
            target: net.clone(),
            net,
            replay: PrioritizedReplay::new(per)?,
            nstep: NStepAccumulator::new(n_step, gamma),
            optimizer,
            train_steps: 0,
            sync_every,
        })
    }

    pub fn net(&self) -> &DuelingNetwork {
        &self.net
    }

    pub fn target(&self) -> &DuelingNetwork {
        &self.target
    }

    pub fn replay(&self) -> &PrioritizedReplay<Transition> {
        &self.replay
    }

    pub fn push_step(&mut self, step: Step) {
        for t in self.nstep.push(step) {
            self.replay.push(t);
        }
    }

    /// One Adam step on an explicit batch. Returns `(loss, td_errors)`.
    pub fn train_on(&mut self, batch: &[&Transition], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        let targets = double_dqn_targets(&self.net, &self.target, batch)?;
        let obs = Matrix::from_rows(self.net.in_dim(), batch.iter().map(|t| t.obs.as_slice()))?;
        let actions: Vec<Vec<usize>> = batch.iter().map(|t| t.action.clone()).collect();
        let out = weighted_td_loss(&self.net, &obs, &actions, &targets, weights)?;
        self.optimizer.step(&mut self.net, &out.grads, "iql")?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.sync_every) {
            self.target.clone_from(&self.net);
        }
        Ok((out.loss, out.td_errors))
    }

    pub fn train_step(&mut self, batch_size: usize, beta: f64, rng: &mut Rng) -> Result<Option<f64>> {
        if self.replay.len() < batch_size {
            return Ok(None);
        }
        let sampled = self.replay.sample(batch_size, beta, rng)?;
        let batch: Vec<Transition> = sampled.iter().map(|s| self.replay.get(s.index).clone()).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let weights: Vec<f64> = sampled.iter().map(|s| s.weight).collect();
        let (loss, td) = self.train_on(&refs, &weights)?;
        let indices: Vec<usize> = sampled.iter().map(|s| s.index).collect();
        self.replay.update_priorities(&indices, &td)?;
        Ok(Some(loss))
    }
}

/// Independent learners, each treating the others as part of the environment.
#[derive(Debug, Clone)]
pub struct IqlLearner {
    agents: Vec<IqlAgent>,
    batch_size: usize,
}

impl IqlLearner {
    pub fn new(config: &LearnerConfig, n_agents: usize, obs_dim: usize, spec: &ActionSpec, rng: &mut Rng) -> Result<Self> {
        let agents = (0..n_agents)
            .map(|_| {
                let net = DuelingNetwork::new(obs_dim, spec, &config.arch, rng)?;
                let opt = AdamState::new(config.adam, &net);
                IqlAgent::new(net, config.per, config.n_step, config.gamma, opt, config.target_sync_every)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            agents,
            batch_size: config.batch_size,
        })
    }

    pub fn agents(&self) -> &[IqlAgent] {
        &self.agents
    }
}

impl Learner for IqlLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Iql
    }

    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn policy(&self, agent: usize) -> &DuelingNetwork {
        &self.agents[agent].net
    }

    fn policy_mut(&mut self, agent: usize) -> &mut DuelingNetwork {
        &mut self.agents[agent].net
    }

    fn observe(&mut self, step: &TeamStep<'_>) -> Result<()> {
        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.push_step(Step {
                obs: step.obs[i].clone(),
                action: step.actions[i].clone(),
                reward: step.rewards[i],
                next_obs: step.next_obs[i].clone(),
                done: step.dones[i],
                truncated: step.truncated,
                extra: (),
            });
        }
        Ok(())
    }

    fn train(&mut self, beta: f64, rng: &mut Rng) -> Result<Option<f64>> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for agent in &mut self.agents {
            if let Some(l) = agent.train_step(self.batch_size, beta, rng)? {
                sum += l;
                count += 1;
            }
        }
        Ok((count > 0).then(|| sum / count as f64))
    }

    fn has_agent_target_networks(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dueling::{max, NetArch};
    use crate::nn::AdamConfig;
    use crate::rng::seeded;

    fn net(seed: u64) -> DuelingNetwork {
        DuelingNetwork::new(3, &ActionSpec::differential_drive(), &NetArch::particle(), &mut seeded(seed, 0)).unwrap()
    }

    fn transition(done: bool) -> Transition {
        Transition {
            obs: alloc::vec![0.0, 0.1, 0.2],
            action: alloc::vec![2, 4],
            n_step_return: 0.75,
            next_obs: alloc::vec![0.3, -0.3, 0.9],
            done,
            n_used: 2,
            gamma_n: 0.81,
            extra: (),
        }
    }

    #[test]
    fn equal_networks_reduce_to_max_target() {
        let n = net(0);
        let t = transition(false);
        let y = double_dqn_targets(&n, &n, &[&t]).unwrap();
        let q = n.q_values(&t.next_obs).unwrap();
        for b in 0..2 {
            assert_eq!(y[0][b], 0.75 + 0.81 * max(&q[b]));
        }
    }

    #[test]
    fn terminal_target_is_return() {
        let (a, b) = (net(1), net(2));
        assert_eq!(double_dqn_targets(&a, &b, &[&transition(true)]).unwrap()[0], [0.75, 0.75]);
    }

    #[test]
    fn hand_computed_double_target() {
        let (online, target) = (net(3), net(4));
        let t = transition(false);
        let q_on = online.q_values(&t.next_obs).unwrap();
        let q_tg = target.q_values(&t.next_obs).unwrap();
        let y = double_dqn_targets(&online, &target, &[&t]).unwrap();
        for b in 0..2 {
            let expected = 0.75 + 0.81 * q_tg[b][argmax(&q_on[b])];
            assert_eq!(y[0][b], expected);
            // never above the plain max over the target network
            assert!(y[0][b] <= 0.75 + 0.81 * max(&q_tg[b]));
        }
    }

    #[test]
    fn target_moves_only_at_sync() {
        let n = net(5);
        let opt = AdamState::new(AdamConfig::default(), &n);
        let mut agent = IqlAgent::new(n, PerConfig::default(), 1, 0.9, opt, 3).unwrap();
        let t = transition(false);
        let before = agent.target().clone();
        agent.train_on(&[&t], &[1.0]).unwrap();
        agent.train_on(&[&t], &[1.0]).unwrap();
        assert_eq!(agent.target(), &before);
        agent.train_on(&[&t], &[1.0]).unwrap();
        assert_eq!(agent.target(), agent.net());
    }
}
