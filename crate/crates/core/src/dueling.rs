//! Dueling Q-network with branching action heads.
//!
//! A shared trunk feeds one state-value stream and one advantage stream per
//! action branch. Each branch is recombined independently with the
//! mean-subtracted aggregation `Q = V + (A - mean(A))`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{codec, Activation, Matrix, Mlp, MlpCache, MlpGrads, Parameters};
use crate::{Error, Result};

/// One discrete action dimension, e.g. angular velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBranch {
    pub name: String,
    /// Physical value of each action index, strictly increasing.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    branches: Vec<ActionBranch>,
}

impl ActionSpec {
    pub fn new(branches: Vec<ActionBranch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Config("action spec needs at least one branch".into()));
        }
        for b in &branches {
            if b.values.is_empty() {
                return Err(Error::Config(alloc::format!("branch {} is empty", b.name)));
            }
            if b.values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(alloc::format!(
                    "branch {} values are not strictly increasing",
                    b.name
                )));
            }
        }
        Ok(Self { branches })
    }

    /// Angular velocity in rad/s and linear velocity in m/s, five values each.
    pub fn differential_drive() -> Self {
        let deg = core::f64::consts::PI / 180.0;
        Self::new(vec![
            ActionBranch {
                name: "angular".into(),
                values: [-90.0, -45.0, 0.0, 45.0, 90.0].iter().map(|d| d * deg).collect(),
            },
            ActionBranch {
                name: "linear".into(),
                values: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            },
        ])
        .expect("static spec")
    }

    /// Single branch of `n` labelled actions (`0..n`).
    pub fn discrete(name: &str, n: usize) -> Result<Self> {
        Self::new(vec![ActionBranch {
            name: name.into(),
            values: (0..n).map(|i| i as f64).collect(),
        }])
    }

    pub fn branches(&self) -> &[ActionBranch] {
        &self.branches
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.values.len()).collect()
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Number of joint actions across all branches.
    pub fn joint_size(&self) -> u128 {
        self.branches.iter().map(|b| b.values.len() as u128).product()
    }
}

/// Layer widths of an agent network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetArch {
    /// Hidden widths of the shared trunk.
    pub trunk: Vec<usize>,
    /// Hidden width inside each stream.
    pub stream_hidden: usize,
    pub activation: Activation,
}

impl NetArch {
    /// 128 ReLU trunk, a dense 64 layer in place of the recurrent one, and a
    /// 64-unit hidden layer in every stream.
    pub fn navigation() -> Self {
        Self {
            trunk: vec![128, 64],
            stream_hidden: 64,
            activation: Activation::ReLU,
        }
    }

    /// Two hidden layers of 64 tanh units.
    pub fn particle() -> Self {
        Self {
            trunk: vec![64],
            stream_hidden: 64,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNetwork {
    trunk: Mlp,
    value: Mlp,
    advantages: Vec<Mlp>,
}

/// State value and per-branch advantages for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Streams {
    pub value: f64,
    pub advantages: Vec<Vec<f64>>,
}

/// Batched stream outputs: `values[j]`, `advantages[b]` is `B x |branch b|`.
#[derive(Debug, Clone)]
pub struct BatchStreams {
    pub values: Vec<f64>,
    pub advantages: Vec<Matrix>,
}

impl BatchStreams {
    /// Aggregated Q-values per branch, each `B x |branch|`.
    pub fn q_values(&self) -> Vec<Matrix> {
        self.advantages
            .iter()
            .map(|adv| {
                let mut q = adv.clone();
                for (j, &v) in self.values.iter().enumerate() {
                    let row = q.row_mut(j);
                    let agg = aggregate_q(v, row);
                    row.copy_from_slice(&agg);
                }
                q
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DuelingCache {
    trunk: MlpCache,
    value: MlpCache,
    advantages: Vec<MlpCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingGrads {
    pub trunk: MlpGrads,
    pub value: MlpGrads,
    pub advantages: Vec<MlpGrads>,
}

/// `Q[a] = V + (A[a] - mean(A))`.
pub fn aggregate_q(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = mean(advantages);
    advantages.iter().map(|a| value + (a - mean)).collect()
}

/// Aggregation with the agent's own value replaced by the joint value
/// `v_joint`. With `raw` the advantages are added without centering.
pub fn q_with_joint_value(v_joint: f64, advantages: &[f64], raw: bool) -> Result<Vec<f64>> {
    if !v_joint.is_finite() {
        return Err(Error::fault("dueling", "non-finite joint state value"));
    }
    if raw {
        Ok(advantages.iter().map(|a| v_joint + a).collect())
    } else {
        Ok(aggregate_q(v_joint, advantages))
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn max(xs: &[f64]) -> f64 {
    xs[argmax(xs)]
}

impl DuelingNetwork {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, spec: &ActionSpec, arch: &NetArch, rng: &mut R) -> Result<Self> {
        if arch.trunk.is_empty() {
            return Err(Error::Config("trunk needs at least one hidden layer".into()));
        }
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&arch.trunk);
        let trunk = Mlp::new(&sizes, arch.activation, arch.activation, rng)?;
        let h = trunk.out_dim();
        let value = Mlp::new(&[h, arch.stream_hidden, 1], arch.activation, Activation::Linear, rng)?;
        let advantages = spec
            .sizes()
            .into_iter()
            .map(|n| Mlp::new(&[h, arch.stream_hidden, n], arch.activation, Activation::Linear, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(trunk, value, advantages)
    }

    pub fn from_parts(trunk: Mlp, value: Mlp, advantages: Vec<Mlp>) -> Result<Self> {
        if advantages.is_empty() {
            return Err(Error::Config("at least one advantage branch is required".into()));
        }
        if value.out_dim() != 1 {
            return Err(Error::Dimension {
                context: "value stream output",
                expected: 1,
                got: value.out_dim(),
            });
        }
        for stream in core::iter::once(&value).chain(&advantages) {
            if stream.in_dim() != trunk.out_dim() {
                return Err(Error::Dimension {
                    context: "stream input",
                    expected: trunk.out_dim(),
                    got: stream.in_dim(),
                });
            }
        }
        Ok(Self {
            trunk,
            value,
            advantages,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn branch_sizes(&self) -> Vec<usize> {
        self.advantages.iter().map(|a| a.out_dim()).collect()
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn value_stream(&self) -> &Mlp {
        &self.value
    }

    pub fn advantage_streams(&self) -> &[Mlp] {
        &self.advantages
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    pub fn value_stream_mut(&mut self) -> &mut Mlp {
        &mut self.value
    }

    pub fn advantage_streams_mut(&mut self) -> &mut [Mlp] {
        &mut self.advantages
    }

    /// V(s) and A(s, .) for one observation.
    pub fn forward_streams(&self, obs: &[f64]) -> Result<Streams> {
        let (streams, _) = self.forward_batch(&Matrix::row_vector(obs))?;
        Ok(Streams {
            value: streams.values[0],
            advantages: streams.advantages.iter().map(|a| a.row(0).to_vec()).collect(),
        })
    }

    /// Aggregated Q-values of every branch for one observation.
    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let s = self.forward_streams(obs)?;
        Ok(s.advantages.iter().map(|a| aggregate_q(s.value, a)).collect())
    }

    pub fn forward_batch(&self, obs: &Matrix) -> Result<(BatchStreams, DuelingCache)> {
        let (h, trunk) = self.trunk.forward(obs)?;
        let (v, value) = self.value.forward(&h)?;
        let mut advs = Vec::with_capacity(self.advantages.len());
        let mut caches = Vec::with_capacity(self.advantages.len());
        for stream in &self.advantages {
            let (a, c) = stream.forward(&h)?;
            advs.push(a);
            caches.push(c);
        }
        Ok((
            BatchStreams {
                values: v.into_vec(),
                advantages: advs,
            },
            DuelingCache {
                trunk,
                value,
                advantages: caches,
            },
        ))
    }

    /// Cache-free batched forward pass.
    pub fn predict_batch(&self, obs: &Matrix) -> Result<BatchStreams> {
        let h = self.trunk.predict(obs)?;
        let values = self.value.predict(&h)?.into_vec();
        let advantages = self
            .advantages
            .iter()
            .map(|s| s.predict(&h))
            .collect::<Result<Vec<_>>>()?;
        Ok(BatchStreams { values, advantages })
    }

    /// Backpropagates per-branch gradients of the aggregated Q-values.
    pub fn backward(&self, cache: &DuelingCache, dq: &[Matrix]) -> Result<DuelingGrads> {
        if dq.len() != self.advantages.len() {
            return Err(Error::Dimension {
                context: "branch gradients",
                expected: self.advantages.len(),
                got: dq.len(),
            });
        }
        let batch = cache.trunk.batch_size();
        let mut dv = Matrix::zeros(batch, 1);
        let mut da = Vec::with_capacity(dq.len());
        for g in dq {
            if g.rows() != batch {
                return Err(Error::Internal("branch gradient batch size".into()));
            }
            let mut d = g.clone();
            for j in 0..batch {
                let row = d.row_mut(j);
                let s: f64 = row.iter().sum();
                let m = s / row.len() as f64;
                for x in row.iter_mut() {
                    *x -= m;
                }
                dv.as_mut_slice()[j] += s;
            }
            da.push(d);
        }
        self.backward_streams(cache, &dv, &da)
    }

    /// Backpropagates gradients given directly on V (`B x 1`) and on each
    /// advantage stream.
    pub fn backward_streams(&self, cache: &DuelingCache, dv: &Matrix, da: &[Matrix]) -> Result<DuelingGrads> {
        if cache.advantages.len() != self.advantages.len() {
            return Err(Error::Internal("stale dueling cache".into()));
        }
        let (value, mut dh) = self.value.backward(&cache.value, dv)?;
        let mut advantages = Vec::with_capacity(da.len());
        for ((stream, c), d) in self.advantages.iter().zip(&cache.advantages).zip(da) {
            let (g, dh_b) = stream.backward(c, d)?;
            dh.add_assign(&dh_b);
            advantages.push(g);
        }
        let trunk = self.trunk.backward_params(&cache.trunk, &dh)?;
        Ok(DuelingGrads {
            trunk,
            value,
            advantages,
        })
    }

    pub fn copy_from(&mut self, other: &DuelingNetwork) -> Result<()> {
        if self.branch_sizes() != other.branch_sizes() {
            return Err(Error::Config("copy between different branch layouts".into()));
        }
        self.trunk.copy_from(&other.trunk)?;
        self.value.copy_from(&other.value)?;
        for (a, b) in self.advantages.iter_mut().zip(&other.advantages) {
            a.copy_from(b)?;
        }
        Ok(())
    }

    /// Flat binary weights; groups are trunk, value, then each advantage stream.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut groups = vec![&self.trunk, &self.value];
        groups.extend(self.advantages.iter());
        codec::encode(&groups)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut nets = codec::decode(bytes)?;
        if nets.len() < 3 {
            return Err(Error::Codec("dueling network needs at least 3 groups".into()));
        }
        let advantages = nets.split_off(2);
        let value = nets.pop().expect("two groups");
        let trunk = nets.pop().expect("one group");
        Self::from_parts(trunk, value, advantages)
    }
}

/// Epsilon-greedy action per branch.
///
/// With probability `1 - epsilon` every branch takes the argmax of its
/// aggregated Q-values, otherwise every branch draws uniformly. Only the
/// agent's own network and observation are read.
pub fn select_action<R: Rng + ?Sized>(
    net: &DuelingNetwork,
    obs: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(alloc::format!("epsilon {epsilon} outside [0, 1]")));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(net.branch_sizes().into_iter().map(|n| rng.gen_range(0..n)).collect());
    }
    Ok(greedy_action(&net.q_values(obs)?))
}

pub fn greedy_action(q: &[Vec<f64>]) -> Vec<usize> {
    q.iter().map(|b| argmax(b)).collect()
}

impl Parameters for DuelingNetwork {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.trunk.tensors();
        t.extend(self.value.tensors());
        for a in &self.advantages {
            t.extend(a.tensors());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.trunk.tensors_mut();
        t.extend(self.value.tensors_mut());
        for a in &mut self.advantages {
            t.extend(a.tensors_mut());
        }
        t
    }
}

impl Parameters for DuelingGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.trunk.tensors();
        t.extend(self.value.tensors());
        for a in &self.advantages {
            t.extend(a.tensors());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.trunk.tensors_mut();
        t.extend(self.value.tensors_mut());
        for a in &mut self.advantages {
            t.extend(a.tensors_mut());
        }
        t
    }
}

/// Output of [`weighted_td_loss`].
#[derive(Debug, Clone)]
pub struct TdLoss {
    pub loss: f64,
    pub grads: DuelingGrads,
    /// Per-item `|y - Q|` averaged across branches.
    pub td_errors: Vec<f64>,
}

/// `(1/B) sum_j w_j sum_b (y_jb - Q_b(s_j, a_jb))^2` and its gradient.
pub fn weighted_td_loss(
    net: &DuelingNetwork,
    obs: &Matrix,
    actions: &[Vec<usize>],
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<TdLoss> {
    let batch = obs.rows();
    if actions.len() != batch || targets.len() != batch || weights.len() != batch {
        return Err(Error::Dimension {
            context: "td batch",
            expected: batch,
            got: actions.len().min(targets.len()).min(weights.len()),
        });
    }
    let (streams, cache) = net.forward_batch(obs)?;
    let q = streams.q_values();
    let nb = q.len();
    let scale = 1.0 / batch as f64;
    let mut dq: Vec<Matrix> = q.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
    let mut loss = 0.0;
    let mut td_errors = Vec::with_capacity(batch);
    for j in 0..batch {
        if actions[j].len() != nb || targets[j].len() != nb {
            return Err(Error::Dimension {
                context: "td branches",
                expected: nb,
                got: actions[j].len(),
            });
        }
        let mut abs = 0.0;
        for b in 0..nb {
            let a = actions[j][b];
            let delta = targets[j][b] - q[b].get(j, a);
            loss += weights[j] * delta * delta * scale;
            dq[b].set(j, a, -2.0 * weights[j] * delta * scale);
            abs += libm::fabs(delta);
        }
        td_errors.push(abs / nb as f64);
    }
    if !loss.is_finite() {
        return Err(Error::fault("dueling", "non-finite td loss"));
    }
    let grads = net.backward(&cache, &dq)?;
    Ok(TdLoss {
        loss,
        grads,
        td_errors,
    })
}
