//! Joint state-value estimator.
//!
//! Consumes the vector of per-agent state values `v = [V_1(s), .., V_N(s)]`
//! and regresses the joint value `V_G(v)` onto `r_team + gamma V_G'(v')`, where
//! `V_G'` is a periodically synced target copy.

use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{Activation, AdamConfig, AdamState, Matrix, Mlp, MlpGrads, Parameters};
use crate::replay::{PerConfig, PrioritizedReplay, UniformReplay};
use crate::{Error, Result};

/// How per-agent rewards collapse into one team reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeamReward {
    Mean,
    Sum,
}

impl TeamReward {
    pub fn combine(self, rewards: &[f64]) -> f64 {
        let s: f64 = rewards.iter().sum();
        match self {
            TeamReward::Sum => s,
            TeamReward::Mean => s / rewards.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralConfig {
    pub n_agents: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    /// Hard target sync period in central training steps.
    pub sync_every: u64,
    pub capacity: usize,
    pub adam: AdamConfig,
    /// Prioritized sampling instead of the uniform ring.
    pub per: Option<PerConfig>,
}

impl CentralConfig {
    pub fn new(n_agents: usize) -> Self {
        Self {
            n_agents,
            hidden: alloc::vec![64, 64],
            gamma: 0.99,
            batch_size: 64,
            sync_every: 200,
            capacity: 50_000,
            adam: AdamConfig::default(),
            per: None,
        }
    }
}

/// One stored team step.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSample {
    pub v: Vec<f64>,
    pub v_next: Vec<f64>,
    pub r_team: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
enum Buffer {
    Uniform(UniformReplay<CentralSample>),
    Prioritized(PrioritizedReplay<CentralSample>),
}

#[derive(Debug, Clone)]
pub struct CentralEstimator {
    config: CentralConfig,
    online: Mlp,
    target: Mlp,
    optimizer: AdamState,
    buffer: Buffer,
    train_steps: u64,
}

impl CentralEstimator {
    pub fn new<R: Rng + ?Sized>(config: CentralConfig, rng: &mut R) -> Result<Self> {
        if config.n_agents == 0 {
            return Err(Error::Config("central estimator needs at least one agent".into()));
        }
        if !(0.0..=1.0).contains(&config.gamma) {
            return Err(Error::Config(alloc::format!("gamma {} outside [0, 1]", config.gamma)));
        }
        let mut sizes = alloc::vec![config.n_agents];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let online = Mlp::new(&sizes, Activation::ReLU, Activation::Linear, rng)?;
        let target = online.clone();
        let optimizer = AdamState::new(config.adam, &online);
        let buffer = match config.per {
            Some(per) => Buffer::Prioritized(PrioritizedReplay::new(PerConfig {
                capacity: config.capacity,
                ..per
            })?),
            None => Buffer::Uniform(UniformReplay::new(config.capacity)),
        };
        Ok(Self {
            config,
            online,
            target,
            optimizer,
            buffer,
            train_steps: 0,
        })
    }

    pub fn config(&self) -> &CentralConfig {
        &self.config
    }

    pub fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    /// Target parameters; they change only in [`CentralEstimator::sync_target`].
    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn buffer_len(&self) -> usize {
        match &self.buffer {
            Buffer::Uniform(b) => b.len(),
            Buffer::Prioritized(b) => b.len(),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.config.n_agents {
            return Err(Error::Dimension {
                context: "joint state-value input",
                expected: self.config.n_agents,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `V_G(v)` with the online or the target parameters.
    pub fn forward_vg(&self, v: &[f64], use_target: bool) -> Result<f64> {
        self.check_len(v)?;
        let net = if use_target { &self.target } else { &self.online };
        Ok(net.predict_one(v)?[0])
    }

    /// Batched `V_G`, one row of `vs` per sample.
    pub fn forward_vg_batch(&self, vs: &Matrix, use_target: bool) -> Result<Vec<f64>> {
        let net = if use_target { &self.target } else { &self.online };
        Ok(net.predict(vs)?.into_vec())
    }

    /// `r_team + gamma * V_G'(v')`, without the bootstrap on terminal steps.
    pub fn td_target(&self, r_team: f64, v_next: &[f64], done: bool) -> Result<f64> {
        if done {
            return Ok(r_team);
        }
        Ok(r_team + self.config.gamma * self.forward_vg(v_next, true)?)
    }

    pub fn push(&mut self, sample: CentralSample) -> Result<()> {
        self.check_len(&sample.v)?;
        self.check_len(&sample.v_next)?;
        match &mut self.buffer {
            Buffer::Uniform(b) => {
                b.push(sample);
            }
            Buffer::Prioritized(b) => {
                b.push(sample);
            }
        }
        Ok(())
    }

    /// Weighted squared TD loss on `batch` and its gradient w.r.t. the online
    /// parameters. Returns `(loss, grads, td_errors)`.
    pub fn loss_and_grads(
        &self,
        batch: &[&CentralSample],
        weights: Option<&[f64]>,
    ) -> Result<(f64, MlpGrads, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty central batch".into()));
        }
        let n = self.config.n_agents;
        let v = Matrix::from_rows(n, batch.iter().map(|s| s.v.as_slice()))?;
        let v_next = Matrix::from_rows(n, batch.iter().map(|s| s.v_next.as_slice()))?;
        let boot = self.target.predict(&v_next)?;
        let (pred, cache) = self.online.forward(&v)?;
        let b = batch.len() as f64;
        let mut grad = Matrix::zeros(batch.len(), 1);
        let mut loss = 0.0;
        let mut td = Vec::with_capacity(batch.len());
        for (j, s) in batch.iter().enumerate() {
            let y = if s.done {
                s.r_team
            } else {
                s.r_team + self.config.gamma * boot.get(j, 0)
            };
            let w = weights.map_or(1.0, |w| w[j]);
            let delta = y - pred.get(j, 0);
            loss += w * delta * delta / b;
            grad.set(j, 0, -2.0 * w * delta / b);
            td.push(delta);
        }
        if !loss.is_finite() {
            return Err(Error::fault("central", "non-finite loss"));
        }
        let grads = self.online.backward_params(&cache, &grad)?;
        Ok((loss, grads, td))
    }

    /// One Adam step on an explicit batch; returns the loss before the step.
    pub fn train_on(&mut self, batch: &[&CentralSample], weights: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let (loss, grads, td) = self.loss_and_grads(batch, weights)?;
        self.optimizer.step(&mut self.online, &grads, "central")?;
        self.train_steps += 1;
        if self.config.sync_every > 0 && self.train_steps.is_multiple_of(self.config.sync_every) {
            self.sync_target();
        }
        Ok((loss, td))
    }

    /// Samples from the buffer and trains once. `None` while the buffer
    /// holds fewer than a batch.
    pub fn train_step<R: Rng + ?Sized>(&mut self, beta: f64, rng: &mut R) -> Result<Option<f64>> {
        let bs = self.config.batch_size;
        if self.buffer_len() < bs {
            return Ok(None);
        }
        match &self.buffer {
            Buffer::Uniform(buf) => {
                let idx = buf.sample(bs, rng).expect("size checked");
                let batch: Vec<CentralSample> = idx.iter().map(|&i| buf.get(i).clone()).collect();
                let refs: Vec<&CentralSample> = batch.iter().collect();
                Ok(Some(self.train_on(&refs, None)?.0))
            }
            Buffer::Prioritized(buf) => {
                let sampled = buf.sample(bs, beta, rng)?;
                let batch: Vec<CentralSample> = sampled.iter().map(|s| buf.get(s.index).clone()).collect();
                let refs: Vec<&CentralSample> = batch.iter().collect();
                let weights: Vec<f64> = sampled.iter().map(|s| s.weight).collect();
                let (loss, td) = self.train_on(&refs, Some(&weights))?;
                let indices: Vec<usize> = sampled.iter().map(|s| s.index).collect();
                if let Buffer::Prioritized(buf) = &mut self.buffer {
                    buf.update_priorities(&indices, &td)?;
                }
                Ok(Some(loss))
            }
        }
    }

    /// Hard copy of the online parameters into the target.
    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    /// Fingerprint of the target parameters.
    pub fn target_fingerprint(&self) -> u64 {
        self.target.fingerprint()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::nn::codec::encode(&[&self.online, &self.target])
    }

    /// Restores online and target weights written by [`CentralEstimator::to_bytes`].
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut nets = crate::nn::codec::decode(bytes)?;
        if nets.len() != 2 {
            return Err(Error::Codec("central checkpoint needs 2 groups".into()));
        }
        let target = nets.pop().expect("len 2");
        let online = nets.pop().expect("len 2");
        self.online.copy_from(&online)?;
        self.target.copy_from(&target)?;
        Ok(())
    }
}
