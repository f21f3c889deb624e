use super::{Scalar, Tensor2};
use crate::error::{Result, ScrError};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "softmax" => Activation::Softmax,
            "identity" => Activation::Identity,
            other => return Err(ScrError::Data(format!("unknown activation '{other}'"))),
        })
    }
}

/// Fully connected layer: out = activation(input · weights + bias).
/// Weights are in×out, bias has one entry per output column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor2<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

/// Values saved by [`DenseLayer::forward_cached`] for the backward pass.
pub struct LayerCache<T> {
    pub input: Tensor2<T>,
    pub output: Tensor2<T>,
}

/// Parameter gradients in the same shapes as the layer parameters.
pub struct LayerGrads<T> {
    pub weights: Tensor2<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor2<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(ScrError::Shape(format!(
                "bias length {} != weight cols {}",
                bias.len(),
                weights.cols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-style random init, deterministic under the given rng.
    pub fn init<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                T::of(g * std)
            })
            .collect();
        Self {
            weights: Tensor2::from_vec(in_dim, out_dim, data).expect("sized above"),
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, input: &Tensor2<T>) -> Result<Tensor2<T>> {
        if input.cols() != self.in_dim() {
            return Err(ScrError::Shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim(),
                input.cols()
            )));
        }
        let mut pre = input.matmul(&self.weights)?;
        for r in 0..pre.rows() {
            let row = pre.row_mut(r);
            for (v, &b) in row.iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        Ok(self.apply_activation(pre))
    }

    pub fn forward_cached(&self, input: &Tensor2<T>) -> Result<(Tensor2<T>, LayerCache<T>)> {
        let output = self.forward(input)?;
        Ok((
            output.clone(),
            LayerCache {
                input: input.clone(),
                output,
            },
        ))
    }

    fn apply_activation(&self, mut pre: Tensor2<T>) -> Tensor2<T> {
        match self.activation {
            Activation::Identity => pre,
            Activation::Tanh => pre.map(|v| v.tanh()),
            Activation::Relu => pre.map(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Sigmoid => pre.map(|v| T::one() / (T::one() + (-v).exp())),
            Activation::Softmax => {
                for r in 0..pre.rows() {
                    softmax_row(pre.row_mut(r));
                }
                pre
            }
        }
    }

    /// Backward pass. `grad_is_preact` means `grad_out` is already the
    /// gradient w.r.t. the pre-activation (the fused softmax/cross-entropy
    /// path); softmax layers only support that form.
    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        grad_out: &Tensor2<T>,
        grad_is_preact: bool,
    ) -> Result<(Tensor2<T>, LayerGrads<T>)> {
        let grad_pre = if grad_is_preact {
            grad_out.clone()
        } else {
            match self.activation {
                Activation::Identity => grad_out.clone(),
                Activation::Tanh => grad_out
                    .hadamard(&cache.output.map(|o| T::one() - o * o))?,
                Activation::Relu => grad_out.hadamard(
                    &cache
                        .output
                        .map(|o| if o > T::zero() { T::one() } else { T::zero() }),
                )?,
                Activation::Sigmoid => grad_out
                    .hadamard(&cache.output.map(|o| o * (T::one() - o)))?,
                Activation::Softmax => {
                    return Err(ScrError::Domain(
                        "softmax backward must be fused with its loss".into(),
                    ))
                }
            }
        };
        let grad_w = cache.input.matmul_at_b(&grad_pre)?;
        let mut grad_b = vec![T::zero(); self.out_dim()];
        for r in 0..grad_pre.rows() {
            for (g, &v) in grad_b.iter_mut().zip(grad_pre.row(r)) {
                *g = *g + v;
            }
        }
        let grad_input = grad_pre.matmul_a_bt(&self.weights)?;
        Ok((
            grad_input,
            LayerGrads {
                weights: grad_w,
                bias: grad_b,
            },
        ))
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    pub fn append_params(&self, out: &mut Vec<T>) {
        out.extend_from_slice(self.weights.data());
        out.extend_from_slice(&self.bias);
    }

    /// Loads parameters from the front of `src`; returns how many were read.
    pub fn load_params(&mut self, src: &[T]) -> usize {
        let nw = self.weights.data().len();
        self.weights.data_mut().copy_from_slice(&src[..nw]);
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

impl<T: Scalar> LayerGrads<T> {
    pub fn append_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(self.weights.data());
        out.extend_from_slice(&self.bias);
    }
}

fn softmax_row<T: Scalar>(row: &mut [T]) {
    let mut max = T::neg_infinity();
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Inverted dropout mask: entries are 0 with probability `rate`, otherwise
/// 1/(1−rate), so the masked input keeps its expectation. Training-mode only;
/// inference applies no mask.
pub fn dropout_mask<T: Scalar, R: Rng>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> Result<Tensor2<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(ScrError::Config(format!(
            "dropout rate must be in [0,1), got {rate}"
        )));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    Tensor2::from_vec(rows, cols, data)
}
