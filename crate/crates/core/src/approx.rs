//! Dense feedforward networks with hand-written backpropagation, plus the
//! SGD/Adam optimizers used for online TD and policy-gradient updates.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! row-major as `[outputs][inputs]` followed by its bias vector, so
//! `out = W x + b` with `W[i][j]` at `offset + i * inputs + j`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Multilayer perceptron: hidden layers use `hidden`, the output layer is
/// linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    sizes: Vec<usize>,
    hidden: Activation,
    params: Vec<f64>,
}

/// Per-layer pre- and post-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `post[0]` is the input, `post[L]` the output.
    post: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace always holds the input")
    }
}

/// Dot product with four independent accumulators, so the additions can
/// overlap instead of forming one long dependency chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl Network {
    /// Random init: weights ~ N(0, 1/fan_in), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = normal.sample(rng);
            }
            offset += fan_out * (fan_in + 1);
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!("a network needs at least 2 layer sizes, got {}", sizes.len())));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        Ok(Self { sizes: sizes.to_vec(), hidden, params: vec![0.0; param_count(sizes)] })
    }

    /// Rebuilds a network from a layer-size header and flat parameters.
    pub fn from_parts(sizes: Vec<usize>, hidden: Activation, params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(&sizes, hidden)?;
        if params.len() != net.params.len() {
            return Err(Error::Validation(format!(
                "expected {} parameters for layers {:?}, found {}",
                net.params.len(),
                sizes,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("network parameters must be finite".into()));
        }
        Ok(Self { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix (row-major, `[outputs][inputs]`) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset: usize = self.sizes.windows(2).take(l).map(|w| w[1] * (w[0] + 1)).sum();
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let offset: usize = self.sizes.windows(2).take(l).map(|w| w[1] * (w[0] + 1)).sum();
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let (w, b) = self.params[offset..offset + n_out * (n_in + 1)].split_at_mut(n_in * n_out);
        (w, b)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            let mut next = bias.to_vec();
            for (i, out) in next.iter_mut().enumerate() {
                let row = &weights[i * n_in..(i + 1) * n_in];
                *out += dot(row, &act);
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = self.hidden.apply(*v));
            }
            act = next;
            offset += n_out * (n_in + 1);
        }
        Ok(act)
    }

    /// Forward pass that keeps every layer's activations for `backward`.
    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut post = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.sizes.len() - 1);
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            let input = post.last().unwrap();
            let z: Vec<f64> = (0..n_out)
                .map(|i| {
                    bias[i] + dot(&weights[i * n_in..(i + 1) * n_in], input)
                })
                .collect();
            let a = if l < last { z.iter().map(|&v| self.hidden.apply(v)).collect() } else { z.clone() };
            pre.push(z);
            post.push(a);
            offset += n_out * (n_in + 1);
        }
        Ok(ForwardTrace { post, pre })
    }

    /// Gradient of a scalar loss with respect to every parameter, given
    /// `d_output = dLoss/dOutput` for the traced input.
    pub fn backward(&self, trace: &ForwardTrace, d_output: &[f64]) -> Result<Vec<f64>> {
        if d_output.len() != self.output_dim() {
            return Err(Error::Type(format!(
                "output gradient has {} components, network emits {}",
                d_output.len(),
                self.output_dim()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for w in self.sizes.windows(2) {
            offsets.push(acc);
            acc += w[1] * (w[0] + 1);
        }
        // delta holds dLoss/dz for the current layer
        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets[l];
            let input = &trace.post[l];
            for i in 0..n_out {
                let d = delta[i];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[offset + i * n_in..offset + (i + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
                grad[offset + n_in * n_out + i] = d;
            }
            if l > 0 {
                let weights = &self.params[offset..offset + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for i in 0..n_out {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[i * n_in..(i + 1) * n_in]) {
                        *p += d * w;
                    }
                }
                for (p, z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                    *p *= self.hidden.derivative(*z);
                }
                delta = prev;
            }
        }
        Ok(grad)
    }

    /// One semi-gradient TD step on `½(target − out[k])²`, where the caller
    /// supplies `td_error = target − out[k]`. A zero error is a no-op.
    pub fn td_step(&mut self, opt: &mut Optimizer, x: &[f64], output_index: usize, td_error: f64) -> Result<()> {
        if !td_error.is_finite() {
            return Err(Error::Numerical(format!("non-finite TD error {td_error}")));
        }
        if output_index >= self.output_dim() {
            return Err(Error::Type(format!(
                "output index {output_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if td_error == 0.0 {
            self.check_input(x)?;
            return Ok(());
        }
        let trace = self.forward_trace(x)?;
        let mut d_out = vec![0.0; self.output_dim()];
        d_out[output_index] = -td_error;
        let grad = self.backward(&trace, &d_out)?;
        opt.step(&mut self.params, &grad)
    }

    /// One policy-gradient step on `−advantage · log π(action)` for a
    /// diagonal Gaussian head. Outputs are `[means…, log_stds…]`; the log
    /// standard deviations are clamped to `policy`'s range and receive no
    /// gradient while clamped. A zero advantage is a no-op.
    pub fn policy_step(
        &mut self,
        opt: &mut Optimizer,
        policy: &GaussianHead,
        x: &[f64],
        action: &[f64],
        advantage: f64,
    ) -> Result<()> {
        if !advantage.is_finite() {
            return Err(Error::Numerical(format!("non-finite advantage {advantage}")));
        }
        if self.output_dim() != 2 * action.len() {
            return Err(Error::Type(format!(
                "policy network emits {} outputs, expected 2 x {} action dims",
                self.output_dim(),
                action.len()
            )));
        }
        if advantage == 0.0 {
            self.check_input(x)?;
            return Ok(());
        }
        let trace = self.forward_trace(x)?;
        let d_out = policy.loss_gradient(trace.output(), action, advantage);
        let grad = self.backward(&trace, &d_out)?;
        opt.step(&mut self.params, &grad)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Type(format!(
                "network input has {} components, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Diagonal Gaussian policy read from a network's raw outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for GaussianHead {
    fn default() -> Self {
        Self { log_std_min: -4.0, log_std_max: 1.0 }
    }
}

impl GaussianHead {
    /// Splits raw outputs into `(means, clamped log stds)`.
    pub fn split<'a>(&self, raw: &'a [f64]) -> (&'a [f64], Vec<f64>) {
        let k = raw.len() / 2;
        let log_std = raw[k..].iter().map(|v| v.clamp(self.log_std_min, self.log_std_max)).collect();
        (&raw[..k], log_std)
    }

    pub fn log_prob(&self, raw: &[f64], action: &[f64]) -> f64 {
        let (mean, log_std) = self.split(raw);
        mean.iter()
            .zip(&log_std)
            .zip(action)
            .map(|((m, ls), a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }

    /// `d(−advantage · log π)/d raw`.
    pub fn loss_gradient(&self, raw: &[f64], action: &[f64], advantage: f64) -> Vec<f64> {
        let k = action.len();
        let mut d = vec![0.0; 2 * k];
        for j in 0..k {
            let mean = raw[j];
            let raw_ls = raw[k + j];
            let ls = raw_ls.clamp(self.log_std_min, self.log_std_max);
            let var = (2.0 * ls).exp();
            let diff = action[j] - mean;
            d[j] = -advantage * diff / var;
            if raw_ls > self.log_std_min && raw_ls < self.log_std_max {
                d[k + j] = -advantage * (diff * diff / var - 1.0);
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First-order optimizer state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Ok(Self { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m, v, t: 0 })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr, 0)
    }

    pub fn adam(lr: f64, n_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr, n_params)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::Type("gradient and parameter lengths differ".into()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return Err(Error::Type("optimizer state does not match the network".into()));
                }
                let bc1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
                let step = self.lr * bc2.sqrt() / bc1;
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let n = params.len();
                let (m, v, grad) = (&mut self.m[..n], &mut self.v[..n], &grad[..n]);
                for i in 0..n {
                    let g = grad[i];
                    m[i] = b1 * m[i] + (1.0 - b1) * g;
                    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                    params[i] -= step * m[i] / (v[i].sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
