//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Weights are stored `fan_in × fan_out` row-major so that a batch
//! `X (B × in)` maps to `X · W + b` without transposes. Hidden layers apply
//! the configured activation; the output layer is always linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix, View};
use crate::error::{Error, Result};

/// Inputs with at most this fraction of non-zero entries take the sparse path.
const SPARSE_DENSITY: f64 = 0.25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: &mut [f64]) {
        match self {
            Activation::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => x.iter_mut().for_each(|v| *v = v.tanh()),
        }
    }

    /// Derivative expressed through the activated output.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    fan_in: usize,
    fan_out: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weight: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    /// Connection from input unit `i` to output unit `o`.
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weight[i * self.fan_out + o]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, value: f64) {
        self.weight[i * self.fan_out + o] = value;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn forward(&self, x: &Matrix, out: &mut Matrix) {
        let batch = x.rows();
        for r in 0..batch {
            out.row_mut(r).copy_from_slice(&self.bias);
        }
        let input = x.as_slice();
        let nnz = input.iter().filter(|v| **v != 0.0).count();
        if (nnz as f64) <= SPARSE_DENSITY * input.len() as f64 {
            for r in 0..batch {
                let y = out.row_mut(r);
                for (i, &xi) in x.row(r).iter().enumerate() {
                    if xi != 0.0 {
                        let w = &self.weight[i * self.fan_out..(i + 1) * self.fan_out];
                        y.iter_mut().zip(w).for_each(|(y, w)| *y += xi * w);
                    }
                }
            }
        } else {
            gemm(
                batch,
                self.fan_in,
                self.fan_out,
                View::row_major(input, self.fan_in),
                View::row_major(&self.weight, self.fan_out),
                1.0,
                out.as_mut_slice(),
            );
        }
    }

    /// Accumulates `∂L/∂W` and `∂L/∂b` for upstream gradient `dy` and layer input `x`.
    fn accumulate_grads(&self, x: &Matrix, dy: &Matrix, grad: &mut Dense) {
        let batch = x.rows();
        for r in 0..batch {
            grad.bias.iter_mut().zip(dy.row(r)).for_each(|(g, d)| *g += d);
        }
        let input = x.as_slice();
        let nnz = input.iter().filter(|v| **v != 0.0).count();
        if (nnz as f64) <= SPARSE_DENSITY * input.len() as f64 {
            for r in 0..batch {
                let d = dy.row(r);
                for (i, &xi) in x.row(r).iter().enumerate() {
                    if xi != 0.0 {
                        let g = &mut grad.weight[i * self.fan_out..(i + 1) * self.fan_out];
                        g.iter_mut().zip(d).for_each(|(g, d)| *g += xi * d);
                    }
                }
            }
        } else {
            gemm(
                self.fan_in,
                batch,
                self.fan_out,
                View::transposed(input, self.fan_in),
                View::row_major(dy.as_slice(), self.fan_out),
                1.0,
                &mut grad.weight,
            );
        }
    }

    fn input_grad(&self, dy: &Matrix) -> Matrix {
        let mut dx = Matrix::zeros(dy.rows(), self.fan_in);
        gemm(
            dy.rows(),
            self.fan_out,
            self.fan_in,
            View::row_major(dy.as_slice(), self.fan_out),
            View::transposed(&self.weight, self.fan_out),
            0.0,
            dx.as_mut_slice(),
        );
        dx
    }
}

/// Feed-forward network parameters. Also used as the container for gradients
/// and optimizer moments, which share the exact same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    activation: Activation,
}

/// Activations recorded by [`Mlp::forward_tape`] for a later backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// `acts[0]` is the input; `acts[l + 1]` is the (activated) output of layer `l`.
    acts: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("tape always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }
}

impl Mlp {
    /// Randomly initialised network, weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::contract("an MLP needs at least input and output sizes"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::contract(format!("layer sizes must be positive: {layer_sizes:?}")));
        }
        let layers = layer_sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { layers, activation })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Dense::zeros(l.fan_in, l.fan_out)).collect(),
            activation: self.activation,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Every weight and bias buffer, in a fixed order.
    pub(crate) fn buffers(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub(crate) fn buffers_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
    }

    /// Per-layer flat parameter slices: `(layer index, weights, biases)`.
    pub(crate) fn layer_slices(&self) -> impl Iterator<Item = (usize, &[f64], &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| (i, l.weight.as_slice(), l.bias.as_slice()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    fn check_shape(&self, other: &Mlp, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what}: shape {:?} does not match {:?}",
                other.layer_sizes(),
                self.layer_sizes()
            )))
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.into_vec())
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = Matrix::zeros(x.rows(), layer.fan_out);
            layer.forward(&x, &mut y);
            if i + 1 < self.layers.len() {
                self.activation.apply(y.as_mut_slice());
            }
            x = y;
        }
        Ok(x)
    }

    /// Forward pass keeping every layer's activation for [`Mlp::backward_tape`].
    pub fn forward_tape(&self, input: Matrix) -> Result<Tape> {
        self.check_input(&input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let x = acts.last().expect("non-empty");
            let mut y = Matrix::zeros(x.rows(), layer.fan_out);
            layer.forward(x, &mut y);
            if i + 1 < self.layers.len() {
                self.activation.apply(y.as_mut_slice());
            }
            acts.push(y);
        }
        Ok(Tape { acts })
    }

    /// Gradients of a loss summed over the batch, given `∂L/∂output`.
    ///
    /// The input gradient is only computed when `want_input_grad` is set since
    /// the first-layer product is the most expensive one on wide inputs.
    pub fn backward_tape(
        &self,
        tape: &Tape,
        output_grad: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Mlp, Option<Matrix>)> {
        let out = tape.output();
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::contract(format!(
                "output gradient is {}x{}, network output is {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                out.rows(),
                out.cols()
            )));
        }
        if tape.acts.len() != self.layers.len() + 1 {
            return Err(Error::contract("tape was recorded on a different network"));
        }
        let mut grads = self.zeros_like();
        let mut dy = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            layer.accumulate_grads(&tape.acts[l], &dy, &mut grads.layers[l]);
            if l == 0 {
                let dx = want_input_grad.then(|| layer.input_grad(&dy));
                return Ok((grads, dx));
            }
            let mut dx = layer.input_grad(&dy);
            let below = &tape.acts[l];
            for (g, &y) in dx.as_mut_slice().iter_mut().zip(below.as_slice()) {
                *g *= self.activation.grad_from_output(y);
            }
            dy = dx;
        }
        unreachable!("loop returns at layer 0")
    }

    /// Single-sample backward pass: `(∂L/∂params, ∂L/∂input)`.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(Mlp, Vec<f64>)> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::contract(format!(
                "output gradient has length {}, expected {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let tape = self.forward_tape(Matrix::from_vec(1, input.len(), input.to_vec())?)?;
        let g = Matrix::from_vec(1, output_grad.len(), output_grad.to_vec())?;
        let (grads, dx) = self.backward_tape(&tape, &g, true)?;
        Ok((grads, dx.expect("requested").into_vec()))
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input has length {}, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `target ← target + τ (live − target)`.
    pub fn polyak_update(&mut self, live: &Mlp, tau: f64) -> Result<()> {
        self.check_shape(live, "polyak update")?;
        for (t, l) in self.buffers_mut().zip(live.buffers()) {
            for (t, l) in t.iter_mut().zip(l) {
                *t += tau * (l - *t);
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.params_mut().for_each(|p| *p *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.params().map(|p| p * p).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// FNV-1a over the bit patterns of every parameter; equal iff bit-identical
    /// (up to hash collisions).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.params() {
            for b in p.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
