use alloc::vec;
use alloc::vec::Vec;

use super::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, model: &P) -> Self {
        let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        Self {
            config,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Nothing is modified when a gradient is non-finite.
    pub fn step<P, G>(&mut self, params: &mut P, grads: &G, context: &'static str) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if grads.len() != self.first.len() || params.len() != self.first.len() {
            return Err(Error::Dimension {
                context: "adam tensors",
                expected: self.first.len(),
                got: grads.len().min(params.len()),
            });
        }
        for ((g, p), m) in grads.iter().zip(params.iter()).zip(&self.first) {
            if g.len() != m.len() || p.len() != m.len() {
                return Err(Error::Dimension {
                    context: "adam tensor",
                    expected: m.len(),
                    got: g.len(),
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::fault(context, "non-finite gradient"));
        }

        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        self.beta1_pow *= beta1;
        self.beta2_pow *= beta2;
        let c1 = 1.0 - self.beta1_pow;
        let c2 = 1.0 - self.beta2_pow;
        for (((g, p), m), v) in grads
            .iter()
            .zip(params.iter_mut())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..g.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl Parameters for Scalar {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![self.0.as_slice()]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![self.0.as_mut_slice()]
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = Scalar(vec![0.5]);
        let mut adam = AdamState::new(AdamConfig::default(), &w);
        adam.step(&mut w, &Scalar(vec![1.0]), "test").unwrap();
        assert!((w.0[0] - (0.5 - 1e-3)).abs() < 1e-10);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut w = Scalar(vec![0.5, -2.0, 3.25]);
        let before = w.0.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &w);
        for _ in 0..50 {
            adam.step(&mut w, &Scalar(vec![0.0; 3]), "test").unwrap();
        }
        assert_eq!(w.0, before);
    }

    #[test]
    fn quadratic_loss_decreases_monotonically() {
        let mut w = Scalar(vec![1.0]);
        let mut adam = AdamState::new(AdamConfig::default(), &w);
        let mut prev = w.0[0] * w.0[0];
        for _ in 0..10 {
            let g = Scalar(vec![2.0 * w.0[0]]);
            adam.step(&mut w, &g, "test").unwrap();
            let f = w.0[0] * w.0[0];
            assert!(f < prev, "{f} !< {prev}");
            prev = f;
        }
    }

    #[test]
    fn non_finite_gradient_is_a_fault_and_leaves_params() {
        let mut w = Scalar(vec![1.0]);
        let mut adam = AdamState::new(AdamConfig::default(), &w);
        let err = adam.step(&mut w, &Scalar(vec![f64::NAN]), "central").unwrap_err();
        assert!(matches!(err, Error::TrainingFault { module: "central", .. }));
        assert_eq!(w.0, vec![1.0]);
        assert_eq!(adam.step_count(), 0);
    }
}
