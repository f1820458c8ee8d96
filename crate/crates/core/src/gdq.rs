//! Agents whose TD targets bootstrap on the joint state value.
//!
//! Each agent keeps only its online dueling network. The bootstrap term swaps
//! the agent's own `V_i(s')` for `V_G'(v')` from the central target net, where
//! `v'` is the vector of every agent's `V_i(s')` stored at collection time.

use alloc::vec::Vec;

use crate::central::{CentralConfig, CentralEstimator, CentralSample, TeamReward};
use crate::dueling::{max, q_with_joint_value, weighted_td_loss, ActionSpec, DuelingNetwork};
use crate::nn::{AdamState, Matrix};
use crate::replay::{NStepAccumulator, PerConfig, PrioritizedReplay, Step, Transition};
use crate::rng::Rng;
use crate::train::{Algorithm, Learner, LearnerConfig, TeamStep, UpdateOrder};
use crate::{Error, Result};

/// Replayed transition; `extra` is the stored `v'`.
pub type GdqTransition = Transition<Vec<f64>>;

/// Per-branch targets `R_n + gamma^n max_a [V_G' (+) A_b(s', a)]` for a batch.
pub fn agent_td_targets(
    net: &DuelingNetwork,
    batch: &[&GdqTransition],
    vg_prime: &[f64],
    raw: bool,
) -> Result<Vec<Vec<f64>>> {
    if vg_prime.len() != batch.len() {
        return Err(Error::Dimension {
            context: "joint values per item",
            expected: batch.len(),
            got: vg_prime.len(),
        });
    }
    let next = Matrix::from_rows(net.in_dim(), batch.iter().map(|t| t.next_obs.as_slice()))?;
    let streams = net.predict_batch(&next)?;
    let mut out = Vec::with_capacity(batch.len());
    for (j, t) in batch.iter().enumerate() {
        let mut ys = Vec::with_capacity(streams.advantages.len());
        for adv in &streams.advantages {
            let y = if t.done {
                t.n_step_return
            } else {
                let q = q_with_joint_value(vg_prime[j], adv.row(j), raw)?;
                t.n_step_return + t.gamma_n * max(&q)
            };
            if !y.is_finite() {
                return Err(Error::fault("gdq", "non-finite td target"));
            }
            ys.push(y);
        }
        out.push(ys);
    }
    Ok(out)
}

/// Single-transition form of [`agent_td_targets`].
pub fn agent_td_target(net: &DuelingNetwork, t: &GdqTransition, vg_prime: f64, raw: bool) -> Result<Vec<f64>> {
    Ok(agent_td_targets(net, &[t], &[vg_prime], raw)?.remove(0))
}

/// Result of one agent update.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentUpdate {
    pub loss: f64,
    pub indices: Vec<usize>,
    pub td_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GdqAgent {
    pub id: usize,
    net: DuelingNetwork,
    replay: PrioritizedReplay<GdqTransition>,
    nstep: NStepAccumulator<Vec<f64>>,
    optimizer: AdamState,
}

impl GdqAgent {
    pub fn new(id: usize, net: DuelingNetwork, per: PerConfig, n_step: usize, gamma: f64, optimizer: AdamState) -> Result<Self> {
        Ok(Self {
            id,
            net,
            replay: PrioritizedReplay::new(per)?,
            nstep: NStepAccumulator::new(n_step, gamma),
            optimizer,
        })
    }

    pub fn net(&self) -> &DuelingNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DuelingNetwork {
        &mut self.net
    }

    pub fn replay(&self) -> &PrioritizedReplay<GdqTransition> {
        &self.replay
    }

    /// Feeds one raw step through the n-step window into replay.
    pub fn push_step(&mut self, step: Step<Vec<f64>>) -> usize {
        let ready = self.nstep.push(step);
        let n = ready.len();
        for t in ready {
            self.replay.push(t);
        }
        n
    }

    /// One Adam step on an explicit batch with known joint values.
    pub fn train_on(&mut self, batch: &[&GdqTransition], weights: &[f64], vg_prime: &[f64], raw: bool) -> Result<(f64, Vec<f64>)> {
        let targets = agent_td_targets(&self.net, batch, vg_prime, raw)?;
        let obs = Matrix::from_rows(self.net.in_dim(), batch.iter().map(|t| t.obs.as_slice()))?;
        let actions: Vec<Vec<usize>> = batch.iter().map(|t| t.action.clone()).collect();
        let out = weighted_td_loss(&self.net, &obs, &actions, &targets, weights)?;
        self.optimizer.step(&mut self.net, &out.grads, "gdq")?;
        Ok((out.loss, out.td_errors))
    }

    /// Samples from the agent's replay, evaluates `V_G'` on the stored `v'`
    /// with the central target parameters, trains and refreshes priorities.
    pub fn train_step(
        &mut self,
        central: &CentralEstimator,
        batch_size: usize,
        beta: f64,
        raw: bool,
        rng: &mut Rng,
    ) -> Result<Option<AgentUpdate>> {
        if self.replay.len() < batch_size {
            return Ok(None);
        }
        let sampled = self.replay.sample(batch_size, beta, rng)?;
        let batch: Vec<GdqTransition> = sampled.iter().map(|s| self.replay.get(s.index).clone()).collect();
        let refs: Vec<&GdqTransition> = batch.iter().collect();
        let v_next = Matrix::from_rows(central.n_agents(), refs.iter().map(|t| t.extra.as_slice()))?;
        let vg = central.forward_vg_batch(&v_next, true)?;
        let weights: Vec<f64> = sampled.iter().map(|s| s.weight).collect();
        let (loss, td_errors) = self.train_on(&refs, &weights, &vg, raw)?;
        let indices: Vec<usize> = sampled.iter().map(|s| s.index).collect();
        self.replay.update_priorities(&indices, &td_errors)?;
        Ok(Some(AgentUpdate {
            loss,
            indices,
            td_errors,
        }))
    }
}

#[derive(Debug, Clone)]
pub struct GdqLearner {
    agents: Vec<GdqAgent>,
    central: CentralEstimator,
    team_reward: TeamReward,
    raw: bool,
    order: UpdateOrder,
    batch_size: usize,
}

impl GdqLearner {
    pub fn new(config: &LearnerConfig, n_agents: usize, obs_dim: usize, spec: &ActionSpec, rng: &mut Rng) -> Result<Self> {
        let mut agents = Vec::with_capacity(n_agents);
        for id in 0..n_agents {
            let net = DuelingNetwork::new(obs_dim, spec, &config.arch, rng)?;
            let optimizer = AdamState::new(config.adam, &net);
            agents.push(GdqAgent::new(id, net, config.per, config.n_step, config.gamma, optimizer)?);
        }
        let mut cc = CentralConfig::new(n_agents);
        cc.hidden = config.central_hidden.clone();
        cc.gamma = config.gamma;
        cc.batch_size = config.batch_size;
        cc.sync_every = config.target_sync_every;
        cc.capacity = config.per.capacity;
        cc.adam = config.adam;
        cc.per = config.central_per.then_some(config.per);
        let central = CentralEstimator::new(cc, rng)?;
        Ok(Self {
            agents,
            central,
            team_reward: config.team_reward.unwrap_or(TeamReward::Mean),
            raw: config.raw_aggregation,
            order: config.update_order,
            batch_size: config.batch_size,
        })
    }

    pub fn agents(&self) -> &[GdqAgent] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [GdqAgent] {
        &mut self.agents
    }

    fn train_agents(&mut self, beta: f64, rng: &mut Rng) -> Result<Option<f64>> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for agent in &mut self.agents {
            if let Some(u) = agent.train_step(&self.central, self.batch_size, beta, self.raw, rng)? {
                sum += u.loss;
                count += 1;
            }
        }
        Ok((count > 0).then(|| sum / count as f64))
    }
}

impl Learner for GdqLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Gdq
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
        let n = self.agents.len();
        if step.obs.len() != n || step.next_obs.len() != n {
            return Err(Error::Dimension {
                context: "team step agents",
                expected: n,
                got: step.obs.len(),
            });
        }
        let mut v = Vec::with_capacity(n);
        let mut v_next = Vec::with_capacity(n);
        for (agent, (o, o2)) in self.agents.iter().zip(step.obs.iter().zip(step.next_obs)) {
            v.push(agent.net.forward_streams(o)?.value);
            v_next.push(agent.net.forward_streams(o2)?.value);
        }
        self.central.push(CentralSample {
            v,
            v_next: v_next.clone(),
            r_team: self.team_reward.combine(step.rewards),
            done: step.dones.iter().all(|&d| d),
        })?;
        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.push_step(Step {
                obs: step.obs[i].clone(),
                action: step.actions[i].clone(),
                reward: step.rewards[i],
                next_obs: step.next_obs[i].clone(),
                done: step.dones[i],
                truncated: step.truncated,
                extra: v_next.clone(),
            });
        }
        Ok(())
    }

    fn train(&mut self, beta: f64, rng: &mut Rng) -> Result<Option<f64>> {
        match self.order {
            UpdateOrder::CentralFirst => {
                self.central.train_step(beta, rng)?;
                self.train_agents(beta, rng)
            }
            UpdateOrder::AgentsFirst => {
                let loss = self.train_agents(beta, rng)?;
                self.central.train_step(beta, rng)?;
                Ok(loss)
            }
        }
    }

    fn has_agent_target_networks(&self) -> bool {
        false
    }

    fn central(&self) -> Option<&CentralEstimator> {
        Some(&self.central)
    }

    fn central_mut(&mut self) -> Option<&mut CentralEstimator> {
        Some(&mut self.central)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dueling::{aggregate_q, NetArch};
    use crate::nn::AdamConfig;
    use crate::rng::seeded;

    fn net(seed: u64) -> DuelingNetwork {
        let spec = ActionSpec::differential_drive();
        DuelingNetwork::new(4, &spec, &NetArch::particle(), &mut seeded(seed, 0)).unwrap()
    }

    fn transition(ret: f64, gamma_n: f64, done: bool) -> GdqTransition {
        Transition {
            obs: alloc::vec![0.1, -0.2, 0.3, 0.0],
            action: alloc::vec![1, 3],
            n_step_return: ret,
            next_obs: alloc::vec![0.5, 0.5, -0.5, 0.25],
            done,
            n_used: 1,
            gamma_n,
            extra: alloc::vec![0.0, 0.0],
        }
    }

    #[test]
    fn terminal_target_is_return() {
        let n = net(0);
        let y = agent_td_target(&n, &transition(1.5, 0.9, true), 100.0, false).unwrap();
        assert_eq!(y, [1.5, 1.5]);
        let y0 = agent_td_target(&n, &transition(0.7, 0.0, false), 3.0, false).unwrap();
        assert_eq!(y0, [0.7, 0.7]);
    }

    #[test]
    fn substitutes_joint_value() {
        let n = net(1);
        let t = transition(1.0, 0.9, false);
        let s = n.forward_streams(&t.next_obs).unwrap();
        let y = agent_td_target(&n, &t, 2.0, false).unwrap();
        for (b, adv) in s.advantages.iter().enumerate() {
            let best = max(&aggregate_q(0.0, adv));
            let expected = 1.0 + 0.9 * (2.0 + best);
            assert!((y[b] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_target() {
        // Single-branch network with zero streams except a bias that makes
        // the centered advantage maximum 0.5.
        let spec = ActionSpec::discrete("a", 3).unwrap();
        let mut n = DuelingNetwork::new(2, &spec, &NetArch::particle(), &mut seeded(2, 0)).unwrap();
        n.value_stream_mut().zero_output_layer();
        let adv = &mut n.advantage_streams_mut()[0];
        adv.zero_output_layer();
        adv.layers_mut().last_mut().unwrap().bias.copy_from_slice(&[0.5, 0.0, -0.5]);
        let mut t = transition(1.0, 0.9, false);
        t.next_obs = alloc::vec![0.3, 0.1];
        t.obs = alloc::vec![0.0, 0.0];
        t.action = alloc::vec![0];
        let y = agent_td_target(&n, &t, 2.0, false).unwrap();
        assert!((y[0] - 3.25).abs() < 1e-12);
    }

    #[test]
    fn joint_value_shift_moves_targets_linearly() {
        let n = net(3);
        let t = transition(0.3, 0.97, false);
        let a = agent_td_target(&n, &t, 1.0, false).unwrap();
        let b = agent_td_target(&n, &t, 1.0 + 4.0, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 0.97 * 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_are_reproducible_bit_for_bit() {
        let n = net(4);
        let ts: Vec<GdqTransition> = (0..8).map(|k| transition(k as f64 * 0.1, 0.95, k % 3 == 0)).collect();
        let refs: Vec<&GdqTransition> = ts.iter().collect();
        let vg: Vec<f64> = (0..8).map(|k| k as f64 - 3.0).collect();
        let first = agent_td_targets(&n, &refs, &vg, false).unwrap();
        let again = agent_td_targets(&n, &refs, &vg, false).unwrap();
        assert_eq!(first, again);
        for (k, t) in ts.iter().enumerate() {
            let one = agent_td_target(&n, t, vg[k], false).unwrap();
            for (a, b) in one.iter().zip(&first[k]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn agent(seed: u64) -> GdqAgent {
        let n = net(seed);
        let opt = AdamState::new(AdamConfig::default(), &n);
        GdqAgent::new(0, n, PerConfig::default(), 1, 0.99, opt).unwrap()
    }

    #[test]
    fn zero_residual_batch_has_zero_loss() {
        let a = agent(5);
        let t = transition(0.0, 0.0, true);
        let q = a.net().q_values(&t.obs).unwrap();
        let obs = Matrix::row_vector(&t.obs);
        let targets = alloc::vec![alloc::vec![q[0][1], q[1][3]]];
        let out = weighted_td_loss(a.net(), &obs, &[t.action.clone()], &targets, &[1.0]).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.td_errors, [0.0]);
    }

    #[test]
    fn loss_matches_weighted_residuals() {
        let mut a = agent(6);
        let t1 = transition(1.0, 0.9, false);
        let mut t2 = transition(-0.5, 0.9, true);
        t2.obs = alloc::vec![0.4, 0.4, 0.1, -0.9];
        t2.action = alloc::vec![4, 0];
        let vg = [0.7, 0.0];
        let w = [0.25, 1.0];
        let y1 = agent_td_target(a.net(), &t1, vg[0], false).unwrap();
        let y2 = agent_td_target(a.net(), &t2, vg[1], false).unwrap();
        let q1 = a.net().q_values(&t1.obs).unwrap();
        let q2 = a.net().q_values(&t2.obs).unwrap();
        let mut expected = 0.0;
        for b in 0..2 {
            expected += w[0] * (y1[b] - q1[b][t1.action[b]]).powi(2);
            expected += w[1] * (y2[b] - q2[b][t2.action[b]]).powi(2);
        }
        expected /= 2.0;
        let (loss, td) = a.train_on(&[&t1, &t2], &w, &vg, false).unwrap();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        let mean_abs = ((y2[0] - q2[0][4]).abs() + (y2[1] - q2[1][0]).abs()) / 2.0;
        assert!((td[1] - mean_abs).abs() < 1e-12);
    }

    #[test]
    fn priorities_follow_td_errors() {
        let mut a = agent(7);
        for k in 0..8 {
            a.push_step(Step {
                obs: alloc::vec![k as f64 * 0.1, 0.0, 0.0, 0.0],
                action: alloc::vec![k % 5, (k + 1) % 5],
                reward: 1.0,
                next_obs: alloc::vec![0.0, k as f64 * 0.1, 0.0, 0.0],
                done: false,
                truncated: false,
                extra: alloc::vec![0.5, -0.5],
            });
        }
        let central = CentralEstimator::new(CentralConfig::new(2), &mut seeded(7, 1)).unwrap();
        let u = a.train_step(&central, 4, 0.4, false, &mut seeded(7, 2)).unwrap().unwrap();
        for (i, td) in u.indices.iter().zip(&u.td_errors) {
            assert_eq!(a.replay().priority(*i), td + 1e-6);
        }
    }

    #[test]
    fn recorded_values_match_fresh_forward_passes() {
        let spec = ActionSpec::discrete("move", 5).unwrap();
        let cfg = LearnerConfig::new(NetArch::particle());
        let mut l = GdqLearner::new(&cfg, 2, 4, &spec, &mut seeded(8, 0)).unwrap();
        let obs = [alloc::vec![0.1, 0.2, 0.3, 0.4], alloc::vec![-0.1, 0.0, 0.5, 0.5]];
        let next = [alloc::vec![0.2, 0.2, 0.3, 0.4], alloc::vec![-0.1, 0.1, 0.5, 0.5]];
        l.observe(&TeamStep {
            obs: &obs,
            actions: &[alloc::vec![1], alloc::vec![2]],
            rewards: &[1.0, 0.0],
            next_obs: &next,
            dones: &[true, true],
            truncated: false,
        })
        .unwrap();
        let t = l.agents()[1].replay().get(0);
        assert_eq!(t.extra.len(), 2);
        for i in 0..2 {
            assert_eq!(t.extra[i], l.policy(i).forward_streams(&next[i]).unwrap().value);
        }
        assert!(!l.has_agent_target_networks());
        assert!(l.central().is_some());
    }
}
