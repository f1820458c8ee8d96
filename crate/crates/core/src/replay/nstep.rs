use alloc::collections::VecDeque;
use alloc::vec::Vec;

/// One raw environment step of a single learner stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<X = ()> {
    pub obs: Vec<f64>,
    pub action: Vec<usize>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True terminal: no bootstrap from `next_obs`.
    pub done: bool,
    /// Episode cut by a step limit; flushes pending steps but still bootstraps.
    pub truncated: bool,
    /// Learner-specific data attached to the bootstrap state.
    pub extra: X,
}

/// An n-step transition ready for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<X = ()> {
    pub obs: Vec<f64>,
    pub action: Vec<usize>,
    /// `sum_{k < n_used} gamma^k r_{t+k}`.
    pub n_step_return: f64,
    /// Observation at `t + n_used`.
    pub next_obs: Vec<f64>,
    pub done: bool,
    pub n_used: usize,
    /// `gamma^n_used`.
    pub gamma_n: f64,
    /// `extra` of the step at `t + n_used - 1`.
    pub extra: X,
}

/// Turns a stream of steps into n-step transitions.
#[derive(Debug, Clone)]
pub struct NStepAccumulator<X = ()> {
    n: usize,
    gamma: f64,
    pending: VecDeque<Step<X>>,
}

impl<X: Clone> NStepAccumulator<X> {
    pub fn new(n: usize, gamma: f64) -> Self {
        assert!(n >= 1, "n-step length must be at least 1");
        Self {
            n,
            gamma,
            pending: VecDeque::with_capacity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Adds a step and returns the transitions that became complete: one
    /// when the window is full, all pending ones when the episode ends.
    pub fn push(&mut self, step: Step<X>) -> Vec<Transition<X>> {
        let ends = step.done || step.truncated;
        self.pending.push_back(step);
        let mut out = Vec::new();
        if ends {
            while !self.pending.is_empty() {
                out.push(self.emit(self.pending.len()));
                self.pending.pop_front();
            }
        } else if self.pending.len() == self.n {
            out.push(self.emit(self.n));
            self.pending.pop_front();
        }
        out
    }

    /// Drops pending steps without emitting them.
    pub fn clear(&mut self) {
        self.pending.clear();
    }

    fn emit(&self, len: usize) -> Transition<X> {
        let mut ret = 0.0;
        let mut discount = 1.0;
        for s in self.pending.iter().take(len) {
            ret += discount * s.reward;
            discount *= self.gamma;
        }
        let first = &self.pending[0];
        let last = &self.pending[len - 1];
        Transition {
            obs: first.obs.clone(),
            action: first.action.clone(),
            n_step_return: ret,
            next_obs: last.next_obs.clone(),
            done: last.done,
            n_used: len,
            gamma_n: discount,
            extra: last.extra.clone(),
        }
    }
}
