use alloc::vec::Vec;

use rand::Rng;

use super::layer::{Activation, DenseLayer, LayerGrads};
use super::{Matrix, Parameters};
use crate::{Error, Result};

/// A sequence of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Everything a backward pass needs from the matching forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of each layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    output: Matrix,
}

impl MlpCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension {
                    context: "layer chain",
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Dimension {
                    context: "layer bias",
                    expected: l.out_dim(),
                    got: l.bias.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Builds `sizes[0] -> sizes[1] -> ... -> sizes[n]` with `hidden` on every
    /// layer except the last, which uses `output`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(alloc::format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::new(sizes[i], sizes[i + 1], act, act.default_init(), rng)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Sets weights and bias of the output layer to zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        let l = &mut self.layers[last];
        *l = DenseLayer {
            weights: Matrix::zeros(l.out_dim(), l.in_dim()),
            bias: alloc::vec![0.0; l.out_dim()],
            activation: l.activation,
        };
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.in_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.in_dim(),
                got: input.cols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass keeping the activations for [`Mlp::backward`].
    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (z, y) = layer.forward(&x);
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        let cache = MlpCache {
            inputs,
            pre,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    /// Batched forward pass without a cache.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x).1;
        }
        Ok(x)
    }

    /// Forward pass on one sample.
    pub fn predict_one(&self, input: &[f64]) -> Result<alloc::vec::Vec<f64>> {
        Ok(self.predict(&Matrix::row_vector(input))?.into_vec())
    }

    /// Parameter gradients and the gradient w.r.t. the network input.
    pub fn backward(&self, cache: &MlpCache, grad_output: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let (g, dx) = self.backward_impl(cache, grad_output, true)?;
        Ok((g, dx.expect("input gradient requested")))
    }

    /// Like [`Mlp::backward`] but skips the input gradient of the first layer.
    pub fn backward_params(&self, cache: &MlpCache, grad_output: &Matrix) -> Result<MlpGrads> {
        Ok(self.backward_impl(cache, grad_output, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &MlpCache,
        grad_output: &Matrix,
        need_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Matrix>)> {
        self.check_cache(cache)?;
        if grad_output.rows() != cache.batch_size() || grad_output.cols() != self.out_dim() {
            return Err(Error::Dimension {
                context: "output gradient",
                expected: cache.batch_size() * self.out_dim(),
                got: grad_output.len(),
            });
        }
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut dy = grad_output.clone();
        let mut dx_first = None;
        for i in (0..n).rev() {
            let y = if i + 1 == n {
                &cache.output
            } else {
                &cache.inputs[i + 1]
            };
            let need = i > 0 || need_input_grad;
            let (g, dx) = self.layers[i].backward(&cache.inputs[i], &cache.pre[i], y, &dy, need);
            grads.push(g);
            match dx {
                Some(dx) if i > 0 => dy = dx,
                other => dx_first = other,
            }
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, dx_first))
    }

    fn check_cache(&self, cache: &MlpCache) -> Result<()> {
        let stale = || Error::Internal("stale forward cache for this network".into());
        if cache.inputs.len() != self.layers.len() || cache.pre.len() != self.layers.len() {
            return Err(stale());
        }
        for (layer, (x, z)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.pre)) {
            if x.cols() != layer.in_dim() || z.cols() != layer.out_dim() {
                return Err(stale());
            }
        }
        Ok(())
    }

    /// Copies parameters from a same-shaped network.
    pub fn copy_from(&mut self, other: &Mlp) -> Result<()> {
        if self.shapes() != other.shapes() {
            return Err(Error::Config("copy between networks of different shapes".into()));
        }
        self.layers.clone_from(&other.layers);
        Ok(())
    }

    /// `(out, in, activation)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize, Activation)> {
        self.layers
            .iter()
            .map(|l| (l.out_dim(), l.in_dim(), l.activation))
            .collect()
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: alloc::vec![0.0; l.weights.len()],
                    bias: alloc::vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Parameters for MlpGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mse, Matrix};
    use crate::rng::seeded;

    fn layer(w: &[f64], rows: usize, cols: usize, b: &[f64], act: Activation) -> DenseLayer {
        DenseLayer {
            weights: Matrix::from_vec(rows, cols, w.to_vec()).unwrap(),
            bias: b.to_vec(),
            activation: act,
        }
    }

    #[test]
    fn identity_linear_and_relu() {
        let lin = Mlp::from_layers(alloc::vec![layer(&[1., 0., 0., 1.], 2, 2, &[0., 0.], Activation::Linear)]).unwrap();
        assert_eq!(lin.predict_one(&[3.0, -1.0]).unwrap(), [3.0, -1.0]);
        let relu = Mlp::from_layers(alloc::vec![layer(&[1., 0., 0., 1.], 2, 2, &[0., 0.], Activation::ReLU)]).unwrap();
        assert_eq!(relu.predict_one(&[3.0, -1.0]).unwrap(), [3.0, 0.0]);
    }

    #[test]
    fn two_layer_composition_by_hand() {
        // h = relu([[1, -1], [0.5, 2]] x + [0.1, -0.2]); y = [2, -3] h + 0.5
        let net = Mlp::from_layers(alloc::vec![
            layer(&[1., -1., 0.5, 2.], 2, 2, &[0.1, -0.2], Activation::ReLU),
            layer(&[2., -3.], 1, 2, &[0.5], Activation::Linear),
        ])
        .unwrap();
        // x = [1, 0.25]: pre = [0.85, 0.8]; h = [0.85, 0.8]; y = 1.7 - 2.4 + 0.5 = -0.2
        let y = net.predict_one(&[1.0, 0.25]).unwrap();
        assert!((y[0] - (-0.2)).abs() < 1e-12);
        // x = [-1, 0.25]: pre = [-1.15, -0.2]; h = [0, 0]; y = 0.5
        let y = net.predict_one(&[-1.0, 0.25]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-12);
        // x = [0, 1]: pre = [-0.9, 1.8]; h = [0, 1.8]; y = -5.4 + 0.5 = -4.9
        let y = net.predict_one(&[0.0, 1.0]).unwrap();
        assert!((y[0] - (-4.9)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut rng = seeded(0, 0);
        let net = Mlp::new(&[3, 4, 2], Activation::ReLU, Activation::Linear, &mut rng).unwrap();
        assert!(matches!(
            net.predict_one(&[1.0, 2.0]),
            Err(Error::Dimension { expected: 3, got: 2, .. })
        ));
    }

    #[test]
    fn scalar_chain_rule() {
        // y = w x with w = 3, x = 2; L = y^2 -> dL/dw = 2 y x = 24
        let net = Mlp::from_layers(alloc::vec![layer(&[3.0], 1, 1, &[0.0], Activation::Linear)]).unwrap();
        let (y, cache) = net.forward(&Matrix::row_vector(&[2.0])).unwrap();
        let dy = Matrix::row_vector(&[2.0 * y.get(0, 0)]);
        let (g, dx) = net.backward(&cache, &dy).unwrap();
        assert_eq!(g.layers[0].weights, [24.0]);
        assert_eq!(g.layers[0].bias, [12.0]);
        assert_eq!(dx.as_slice(), [36.0]);
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let net = Mlp::from_layers(alloc::vec![layer(&[1.0, 1.0], 2, 1, &[0.0, 0.0], Activation::ReLU)]).unwrap();
        let (_, cache) = net.forward(&Matrix::row_vector(&[-2.0])).unwrap();
        let (g, dx) = net.backward(&cache, &Matrix::row_vector(&[1.0, 1.0])).unwrap();
        assert_eq!(g.layers[0].weights, [0.0, 0.0]);
        assert_eq!(dx.as_slice(), [0.0]);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = seeded(0, 0);
        let a = Mlp::new(&[3, 4, 2], Activation::ReLU, Activation::Linear, &mut rng).unwrap();
        let b = Mlp::new(&[3, 5, 2], Activation::ReLU, Activation::Linear, &mut rng).unwrap();
        let (_, cache) = a.forward(&Matrix::row_vector(&[1., 2., 3.])).unwrap();
        assert!(matches!(
            b.backward(&cache, &Matrix::row_vector(&[1., 1.])),
            Err(Error::Internal(_))
        ));
    }

    /// Central differences on a 4-3-2 net with an MSE head.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(7, 0);
        for trial in 0..20 {
            let act = if trial % 2 == 0 { Activation::ReLU } else { Activation::Tanh };
            let mut net = Mlp::new(&[4, 3, 2], act, Activation::Linear, &mut rng).unwrap();
            let x = Matrix::from_vec(3, 4, (0..12).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()).unwrap();
            let t = Matrix::from_vec(3, 2, (0..6).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()).unwrap();
            let (y, cache) = net.forward(&x).unwrap();
            let (_, dy) = mse(&y, &t).unwrap();
            let (g, _) = net.backward(&cache, &dy).unwrap();
            let analytic = g.flatten();

            let h = 1e-6;
            let n = net.num_params();
            let mut numeric = alloc::vec![0.0; n];
            for (i, num) in numeric.iter_mut().enumerate() {
                let probe = |delta: f64, net: &mut Mlp| {
                    let mut k = i;
                    for tensor in net.tensors_mut() {
                        if k < tensor.len() {
                            tensor[k] += delta;
                            break;
                        }
                        k -= tensor.len();
                    }
                };
                probe(h, &mut net);
                let lp = mse(&net.predict(&x).unwrap(), &t).unwrap().0;
                probe(-2.0 * h, &mut net);
                let lm = mse(&net.predict(&x).unwrap(), &t).unwrap().0;
                probe(h, &mut net);
                *num = (lp - lm) / (2.0 * h);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
            assert!(diff / scale < 1e-5, "trial {trial}: rel err {}", diff / scale);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = seeded(3, 0);
        let net = Mlp::new(&[5, 8, 3], Activation::ReLU, Activation::Linear, &mut rng).unwrap();
        let x = [0.1, -0.4, 0.3, 0.9, -1.0];
        let a = net.predict_one(&x).unwrap();
        let b = net.predict_one(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
