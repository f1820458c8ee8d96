//! Minimal dense neural-network engine.
//!
//! Everything is `f64` and batched: a batch is a [`Matrix`] with one sample
//! per row. Gradients are produced by explicit backpropagation through the
//! cached pre-activations of a forward pass.

mod adam;
pub mod codec;
mod layer;
mod matrix;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use layer::{Activation, DenseLayer, Init, LayerGrads};
pub use matrix::Matrix;
pub use mlp::{Mlp, MlpCache, MlpGrads};

use alloc::vec::Vec;

/// Flat view over the trainable tensors of a model (or of its gradients).
///
/// Implementors must yield tensors in the same order from both methods and
/// a gradient type must mirror the order of its model.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Copies all parameters into one flat vector.
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    /// FNV-1a hash over the raw bits of every parameter.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in t {
                for b in v.to_bits().to_le_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Mean squared error over all elements, and its gradient w.r.t. `pred`.
pub fn mse(pred: &Matrix, target: &Matrix) -> crate::Result<(f64, Matrix)> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(crate::Error::Dimension {
            context: "mse",
            expected: pred.len(),
            got: target.len(),
        });
    }
    let n = pred.len().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let r = p - t;
        loss += r * r;
        *g = 2.0 * r / n;
    }
    Ok((loss / n, grad))
}
