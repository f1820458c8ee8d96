use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{gemm, Op};
use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Tanh => libm::tanh(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::ReLU => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::ReLU),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    /// He for ReLU, Xavier otherwise.
    pub fn default_init(self) -> Init {
        match self {
            Activation::ReLU => Init::He,
            Activation::Tanh | Activation::Linear => Init::Xavier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zeros,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    /// Uniform in `±sqrt(6 / fan_in)`.
    He,
}

/// `y = activation(W x + b)` with `W` stored as an `out x in` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let mut weights = Matrix::zeros(out_dim, in_dim);
        let limit = match init {
            Init::Zeros => 0.0,
            Init::Xavier => libm::sqrt(6.0 / (in_dim + out_dim) as f64),
            Init::He => libm::sqrt(6.0 / in_dim as f64),
        };
        if limit > 0.0 {
            for w in weights.as_mut_slice() {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Self {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Returns `(pre_activation, output)` for a batch `x` of shape `B x in`.
    pub(crate) fn forward(&self, x: &Matrix) -> (Matrix, Matrix) {
        let mut z = Matrix::zeros(x.rows(), self.out_dim());
        gemm(1.0, x, Op::N, &self.weights, Op::T, 0.0, &mut z);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        let y = if self.activation == Activation::Linear {
            z.clone()
        } else {
            let mut y = z.clone();
            for v in y.as_mut_slice() {
                *v = self.activation.apply(*v);
            }
            y
        };
        (z, y)
    }

    /// Backpropagates `dy` through the layer. The input gradient is skipped
    /// when `need_input_grad` is false.
    pub(crate) fn backward(
        &self,
        x: &Matrix,
        z: &Matrix,
        y: &Matrix,
        dy: &Matrix,
        need_input_grad: bool,
    ) -> (LayerGrads, Option<Matrix>) {
        let mut dz = dy.clone();
        if self.activation != Activation::Linear {
            for ((d, zv), yv) in dz
                .as_mut_slice()
                .iter_mut()
                .zip(z.as_slice())
                .zip(y.as_slice())
            {
                *d *= self.activation.derivative(*zv, *yv);
            }
        }
        let mut dw = Matrix::zeros(self.out_dim(), self.in_dim());
        gemm(1.0, &dz, Op::T, x, Op::N, 0.0, &mut dw);
        let db = dz.column_sums();
        let dx = need_input_grad.then(|| {
            let mut dx = Matrix::zeros(x.rows(), self.in_dim());
            gemm(1.0, &dz, Op::N, &self.weights, Op::N, 0.0, &mut dx);
            dx
        });
        (
            LayerGrads {
                weights: dw.into_vec(),
                bias: db,
            },
            dx,
        )
    }
}
