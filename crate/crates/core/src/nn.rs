//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are row-major `(out_dim, in_dim)`. Hidden layers use relu, the
//! output layer is identity; callers apply [`softmax`] themselves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::rng::Prng;

/// Clamp applied inside the log of [`cross_entropy`].
pub const LOG_EPS: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(rows > 0 && cols > 0, Contract, "matrix dims must be positive, got {rows}x{cols}");
        ensure!(
            values.len() == rows * cols,
            Contract,
            "matrix {rows}x{cols} needs {} values, got {}",
            rows * cols,
            values.len()
        );
        ensure!(values.iter().all(|v| v.is_finite()), Contract, "matrix entries must be finite");
        Ok(Self { rows, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// Glorot/Xavier uniform initialization: entries uniform in `[-s, s]` with
/// `s = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Prng) -> Mat {
    let s = libm::sqrt(6.0 / (rows + cols) as f64);
    let values = (0..rows * cols).map(|_| (2.0 * rng.uniform() - 1.0) * s).collect();
    Mat { rows, cols, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }
}

/// A stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Post-activation outputs of every layer, plus the input that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub input: Vec<f64>,
    pub layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map_or(&self.input, Vec::as_slice)
    }
}

/// Gradient buffers shaped like an [`Mlp`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<LayerGrad>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Mlp {
    /// Validates that the layers chain and that the last one is identity.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        ensure!(!layers.is_empty(), Contract, "network needs at least one layer");
        for (i, l) in layers.iter().enumerate() {
            ensure!(
                l.bias.len() == l.out_dim(),
                Contract,
                "layer {i}: bias length {} != out dim {}",
                l.bias.len(),
                l.out_dim()
            );
            ensure!(l.bias.iter().all(|b| b.is_finite()), Contract, "layer {i}: non-finite bias");
            if i > 0 {
                ensure!(
                    layers[i - 1].out_dim() == l.in_dim(),
                    Contract,
                    "layer {i}: input dim {} does not chain with previous output {}",
                    l.in_dim(),
                    layers[i - 1].out_dim()
                );
            }
        }
        ensure!(
            layers.last().map(|l| l.activation) == Some(Activation::Identity),
            Contract,
            "final layer activation must be identity"
        );
        Ok(Self { layers })
    }

    /// Glorot-initialized net over `dims = [input, hidden.., output]`, relu
    /// on hidden layers, zero biases.
    pub fn glorot(dims: &[usize], rng: &mut Prng) -> Result<Self> {
        ensure!(dims.len() >= 2, Contract, "need at least input and output dims");
        ensure!(dims.iter().all(|&d| d > 0), Contract, "layer dims must be positive: {dims:?}");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: glorot_init(w[1], w[0], rng),
                bias: vec![0.0; w[1]],
                activation: if i == last { Activation::Identity } else { Activation::Relu },
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Same shapes, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weight: Mat::zeros(l.out_dim(), l.in_dim()),
                bias: vec![0.0; l.out_dim()],
                activation: l.activation,
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Multiply-accumulate count of one forward pass.
    pub fn macs(&self) -> u64 {
        self.layers.iter().map(|l| (l.in_dim() * l.out_dim()) as u64).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Trace> {
        ensure!(
            input.len() == self.input_dim(),
            Contract,
            "input length {} != network input dim {}",
            input.len(),
            self.input_dim()
        );
        let mut layers: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = layers.last().map_or(input, Vec::as_slice);
            let y = (0..layer.out_dim())
                .map(|r| {
                    let z = dot(layer.weight.row(r), x) + layer.bias[r];
                    layer.activation.apply(z)
                })
                .collect();
            layers.push(y);
        }
        Ok(Trace { input: input.to_vec(), layers })
    }

    /// Forward pass returning only the output vector.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward(input)?;
        Ok(trace.layers.pop().unwrap_or_default())
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.out_dim() * l.in_dim()],
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Reverse pass. Returns parameter gradients and the gradient at the input.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64]) -> Result<(MlpGrad, Vec<f64>)> {
        let mut grads = self.zero_grad();
        let gin = self.backward_into(trace, grad_out, &mut grads)?;
        Ok((grads, gin))
    }

    /// Reverse pass that adds into `grads`, for weights shared across
    /// several applications.
    pub fn backward_into(&self, trace: &Trace, grad_out: &[f64], grads: &mut MlpGrad) -> Result<Vec<f64>> {
        ensure!(
            trace.layers.len() == self.layers.len()
                && trace.input.len() == self.input_dim()
                && trace.layers.iter().zip(&self.layers).all(|(a, l)| a.len() == l.out_dim()),
            Contract,
            "trace does not match network shape"
        );
        ensure!(
            grad_out.len() == self.output_dim(),
            Contract,
            "output gradient length {} != output dim {}",
            grad_out.len(),
            self.output_dim()
        );
        ensure!(grads.layers.len() == self.layers.len(), Contract, "gradient buffer does not match network");

        let mut upstream = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &trace.layers[i];
            let x = if i == 0 { &trace.input } else { &trace.layers[i - 1] };
            let delta: Vec<f64> = upstream
                .iter()
                .zip(out)
                .map(|(g, &y)| g * layer.activation.derivative_at_output(y))
                .collect();
            let g = &mut grads.layers[i];
            let cols = layer.in_dim();
            for (r, &d) in delta.iter().enumerate() {
                g.bias[r] += d;
                if d != 0.0 {
                    for (w, &xc) in g.weight[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                        *w += d * xc;
                    }
                }
            }
            let mut down = vec![0.0; cols];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (acc, &w) in down.iter_mut().zip(layer.weight.row(r)) {
                        *acc += d * w;
                    }
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-ln(max(probs[label], LOG_EPS))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    ensure!(label < probs.len(), Contract, "label {label} out of range for {} classes", probs.len());
    Ok(-libm::log(probs[label].max(LOG_EPS)))
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
