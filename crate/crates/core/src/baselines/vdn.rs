use alloc::vec::Vec;

use crate::central::TeamReward;
use crate::dueling::{argmax, ActionSpec, DuelingGrads, DuelingNetwork};
use crate::nn::{AdamState, Matrix};
use crate::replay::{NStepAccumulator, PerConfig, PrioritizedReplay, Step, Transition};
use crate::rng::Rng;
use crate::train::{Algorithm, Learner, LearnerConfig, TeamStep};
use crate::{Error, Result};

/// Team transition: observations and actions are concatenated agent-major;
/// `extra[i]` marks agent `i` as terminal at the bootstrap state.
pub type VdnTransition = Transition<Vec<bool>>;

/// `sum_i Q_i^b(o_i, a_i)` for one action branch.
pub fn vdn_joint_q(nets: &[&DuelingNetwork], observations: &[Vec<f64>], branch: usize, joint: &[usize]) -> Result<f64> {
    if nets.len() != observations.len() || nets.len() != joint.len() {
        return Err(Error::Dimension {
            context: "vdn agents",
            expected: nets.len(),
            got: joint.len(),
        });
    }
    let mut total = 0.0;
    for ((net, obs), &a) in nets.iter().zip(observations).zip(joint) {
        total += net.q_values(obs)?[branch][a];
    }
    Ok(total)
}

fn agent_rows(batch: &[&VdnTransition], agent: usize, dim: usize, next: bool) -> Result<Matrix> {
    Matrix::from_rows(
        dim,
        batch.iter().map(|t| {
            let src = if next { &t.next_obs } else { &t.obs };
            &src[agent * dim..(agent + 1) * dim]
        }),
    )
}

/// Output of [`vdn_loss`].
#[derive(Debug, Clone)]
pub struct VdnLoss {
    pub loss: f64,
    pub grads: Vec<DuelingGrads>,
    pub td_errors: Vec<f64>,
}

/// Weighted squared TD loss on the per-branch sum `Q_G^b = sum_i Q_i^b`
/// with a double-DQN bootstrap summed over non-terminal agents.
pub fn vdn_loss(
    nets: &[&DuelingNetwork],
    targets: &[&DuelingNetwork],
    batch: &[&VdnTransition],
    weights: &[f64],
) -> Result<VdnLoss> {
    let n = nets.len();
    let dim = nets[0].in_dim();
    let nb = nets[0].branch_sizes().len();
    let bsz = batch.len();
    let scale = 1.0 / bsz as f64;
    for t in batch {
        if t.obs.len() != n * dim || t.action.len() != n * nb || t.extra.len() != n {
            return Err(Error::Dimension {
                context: "vdn team transition",
                expected: n * dim,
                got: t.obs.len(),
            });
        }
    }
    let mut y: Vec<Vec<f64>> = batch.iter().map(|t| alloc::vec![t.n_step_return; nb]).collect();
    let mut q_tot = alloc::vec![alloc::vec![0.0; nb]; bsz];
    let mut forwards = Vec::with_capacity(n);
    for i in 0..n {
        let (streams, cache) = nets[i].forward_batch(&agent_rows(batch, i, dim, false)?)?;
        let q = streams.q_values();
        let next = agent_rows(batch, i, dim, true)?;
        let q_on = nets[i].predict_batch(&next)?.q_values();
        let q_tg = targets[i].predict_batch(&next)?.q_values();
        for (j, t) in batch.iter().enumerate() {
            for b in 0..nb {
                q_tot[j][b] += q[b].get(j, t.action[i * nb + b]);
                if !t.extra[i] {
                    y[j][b] += t.gamma_n * q_tg[b].get(j, argmax(q_on[b].row(j)));
                }
            }
        }
        forwards.push((q, cache));
    }
    let mut loss = 0.0;
    let mut td_errors = Vec::with_capacity(bsz);
    let mut dq: Vec<Vec<Matrix>> = forwards
        .iter()
        .map(|(q, _)| q.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect())
        .collect();
    for (j, t) in batch.iter().enumerate() {
        let mut abs = 0.0;
        for b in 0..nb {
            let delta = y[j][b] - q_tot[j][b];
            loss += weights[j] * delta * delta * scale;
            abs += libm::fabs(delta);
            for (i, d) in dq.iter_mut().enumerate() {
                d[b].set(j, t.action[i * nb + b], -2.0 * weights[j] * delta * scale);
            }
        }
        td_errors.push(abs / nb as f64);
    }
    if !loss.is_finite() {
        return Err(Error::fault("vdn", "non-finite loss"));
    }
    let grads = forwards
        .iter()
        .zip(nets)
        .zip(&dq)
        .map(|(((_, cache), net), d)| net.backward(cache, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(VdnLoss {
        loss,
        grads,
        td_errors,
    })
}

/// Additive value decomposition trained on one shared team replay.
#[derive(Debug, Clone)]
pub struct VdnLearner {
    nets: Vec<DuelingNetwork>,
    targets: Vec<DuelingNetwork>,
    optimizers: Vec<AdamState>,
    replay: PrioritizedReplay<VdnTransition>,
    nstep: NStepAccumulator<Vec<bool>>,
    team_reward: TeamReward,
    batch_size: usize,
    sync_every: u64,
    train_steps: u64,
}

impl VdnLearner {
    pub fn new(config: &LearnerConfig, n_agents: usize, obs_dim: usize, spec: &ActionSpec, rng: &mut Rng) -> Result<Self> {
        let nets = (0..n_agents)
            .map(|_| DuelingNetwork::new(obs_dim, spec, &config.arch, rng))
            .collect::<Result<Vec<_>>>()?;
        let per: PerConfig = config.per;
        Ok(Self {
            targets: nets.clone(),
            optimizers: nets.iter().map(|n| AdamState::new(config.adam, n)).collect(),
            nets,
            replay: PrioritizedReplay::new(per)?,
            nstep: NStepAccumulator::new(config.n_step, config.gamma),
            team_reward: config.team_reward.unwrap_or(TeamReward::Sum),
            batch_size: config.batch_size,
            sync_every: config.target_sync_every,
            train_steps: 0,
        })
    }

    pub fn replay(&self) -> &PrioritizedReplay<VdnTransition> {
        &self.replay
    }

    pub fn targets(&self) -> &[DuelingNetwork] {
        &self.targets
    }

    /// One Adam step per agent on an explicit batch; returns `(loss, td_errors)`.
    pub fn train_on(&mut self, batch: &[&VdnTransition], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        let nets: Vec<&DuelingNetwork> = self.nets.iter().collect();
        let targets: Vec<&DuelingNetwork> = self.targets.iter().collect();
        let out = vdn_loss(&nets, &targets, batch, weights)?;
        for ((net, opt), g) in self.nets.iter_mut().zip(&mut self.optimizers).zip(&out.grads) {
            opt.step(net, g, "vdn")?;
        }
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.sync_every) {
            self.targets.clone_from(&self.nets);
        }
        Ok((out.loss, out.td_errors))
    }
}

impl Learner for VdnLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Vdn
    }

    fn n_agents(&self) -> usize {
        self.nets.len()
    }

    fn policy(&self, agent: usize) -> &DuelingNetwork {
        &self.nets[agent]
    }

    fn policy_mut(&mut self, agent: usize) -> &mut DuelingNetwork {
        &mut self.nets[agent]
    }

    fn observe(&mut self, step: &TeamStep<'_>) -> Result<()> {
        let step = Step {
            obs: step.obs.concat(),
            action: step.actions.concat(),
            reward: self.team_reward.combine(step.rewards),
            next_obs: step.next_obs.concat(),
            done: step.dones.iter().any(|&d| d),
            truncated: step.truncated,
            extra: step.dones.to_vec(),
        };
        for t in self.nstep.push(step) {
            self.replay.push(t);
        }
        Ok(())
    }

    fn train(&mut self, beta: f64, rng: &mut Rng) -> Result<Option<f64>> {
        if self.replay.len() < self.batch_size {
            return Ok(None);
        }
        let sampled = self.replay.sample(self.batch_size, beta, rng)?;
        let batch: Vec<VdnTransition> = sampled.iter().map(|s| self.replay.get(s.index).clone()).collect();
        let refs: Vec<&VdnTransition> = batch.iter().collect();
        let weights: Vec<f64> = sampled.iter().map(|s| s.weight).collect();
        let (loss, td) = self.train_on(&refs, &weights)?;
        let indices: Vec<usize> = sampled.iter().map(|s| s.index).collect();
        self.replay.update_priorities(&indices, &td)?;
        Ok(Some(loss))
    }

    fn has_agent_target_networks(&self) -> bool {
        true
    }
}
