//! Fully-connected networks with hand-written backpropagation and Adam.
//!
//! Parameters live in one flat `Vec<f64>`: for each layer, the row-major
//! weight matrix (`outputs × inputs`) followed by the bias vector. Gradients
//! use the same layout, which keeps Adam and the target-network soft update
//! plain elementwise loops.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the pre-activation `pre` and the
    /// activation output `post`.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
        }
    }

    fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetRecord", into = "NetRecord")]
pub struct DenseNet {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer values kept from a forward pass for backpropagation.
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl DenseNet {
    /// A network with every parameter set to zero.
    pub fn zeros(shapes: Vec<LayerShape>) -> Result<Self> {
        let offsets = validate_shapes(&shapes)?;
        let n = offsets.last().copied().unwrap_or(0);
        Ok(Self {
            shapes,
            offsets: offsets[..offsets.len() - 1].to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for
    /// weights and biases alike.
    pub fn random<R: Rng + ?Sized>(shapes: Vec<LayerShape>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(shapes)?;
        for l in 0..net.shapes.len() {
            let bound = 1.0 / (net.shapes[l].inputs as f64).sqrt();
            let range = net.layer_range(l);
            for p in &mut net.params[range] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    /// Input → hidden layers (all sharing `hidden_activation`) → output.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut shapes = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            shapes.push(LayerShape::new(prev, h, hidden_activation));
            prev = h;
        }
        shapes.push(LayerShape::new(prev, output, output_activation));
        Self::random(shapes, rng)
    }

    /// Builds a network from explicit `(weights[out][in], bias[out], activation)` triples.
    pub fn from_layers(layers: Vec<(Vec<Vec<f64>>, Vec<f64>, Activation)>) -> Result<Self> {
        let mut shapes = Vec::with_capacity(layers.len());
        let mut params = Vec::new();
        for (weights, bias, activation) in layers {
            let outputs = weights.len();
            let inputs = weights.first().map_or(0, Vec::len);
            check_len(outputs, bias.len())?;
            for row in &weights {
                check_len(inputs, row.len())?;
                params.extend_from_slice(row);
            }
            params.extend_from_slice(&bias);
            shapes.push(LayerShape::new(inputs, outputs, activation));
        }
        let mut net = Self::zeros(shapes)?;
        net.params = params;
        if !net.is_finite() {
            return Err(Error::Network("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 1].outputs
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Row-major weights of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        let start = self.offsets[l];
        &self.params[start..start + s.inputs * s.outputs]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        let start = self.offsets[l] + s.inputs * s.outputs;
        &self.params[start..start + s.outputs]
    }

    /// Weights and biases of layer `l`, in the flat layout.
    pub fn layer_params_mut(&mut self, l: usize) -> &mut [f64] {
        let range = self.layer_range(l);
        &mut self.params[range]
    }

    fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.shapes[l].param_count()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), input.len())?;
        Ok(self.eval(input))
    }

    /// Forward pass without the shape check; callers guarantee the length.
    pub(crate) fn eval(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut current = input.to_vec();
        for (l, s) in self.shapes.iter().enumerate() {
            let w = self.weights(l);
            let b = self.bias(l);
            current = (0..s.outputs)
                .map(|o| {
                    let row = &w[o * s.inputs..(o + 1) * s.inputs];
                    let dot: f64 = row.iter().zip(&current).map(|(a, c)| a * c).sum();
                    s.activation.apply(dot + b[o])
                })
                .collect();
        }
        current
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let mut pre = Vec::with_capacity(self.shapes.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.shapes.len());
        for (l, s) in self.shapes.iter().enumerate() {
            let w = self.weights(l);
            let b = self.bias(l);
            let prev: &[f64] = if l == 0 { input } else { &post[l - 1] };
            let z: Vec<f64> = (0..s.outputs)
                .map(|o| {
                    let row = &w[o * s.inputs..(o + 1) * s.inputs];
                    row.iter().zip(prev).map(|(a, c)| a * c).sum::<f64>() + b[o]
                })
                .collect();
            let a = z.iter().map(|&v| s.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }

    /// Gradient of `output_gradient · net(input)` with respect to every
    /// parameter (flat layout) and to the input.
    pub fn backward(&self, input: &[f64], output_gradient: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.input_dim(), input.len())?;
        check_len(self.output_dim(), output_gradient.len())?;
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.accumulate_gradient(input, output_gradient, &mut grads);
        Ok((grads, input_grad))
    }

    /// Adds the parameter gradient into `grads` and returns the input
    /// gradient. Used to sum gradients over a minibatch without reallocating.
    pub(crate) fn accumulate_gradient(
        &self,
        input: &[f64],
        output_gradient: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.params.len());
        let trace = self.trace(input);
        let mut delta: Vec<f64> = output_gradient.to_vec();
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= s.activation.derivative(trace.pre[l][o], trace.post[l][o]);
            }
            let prev: &[f64] = if l == 0 { input } else { &trace.post[l - 1] };
            let start = self.offsets[l];
            let bias_start = start + s.inputs * s.outputs;
            for o in 0..s.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[start + o * s.inputs..start + (o + 1) * s.inputs];
                for (g, &a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
                grads[bias_start + o] += d;
            }
            let w = self.weights(l);
            let mut next = vec![0.0; s.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * s.inputs..(o + 1) * s.inputs];
                for (n, &wv) in next.iter_mut().zip(row) {
                    *n += d * wv;
                }
            }
            delta = next;
        }
        delta
    }

    /// `self ← tau · online + (1 − tau) · self`.
    pub fn soft_update_from(&mut self, online: &DenseNet, tau: f64) -> Result<()> {
        if self.shapes != online.shapes {
            return Err(Error::Network("soft update between different shapes".into()));
        }
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

fn validate_shapes(shapes: &[LayerShape]) -> Result<Vec<usize>> {
    if shapes.is_empty() {
        return Err(Error::Network("at least one layer required".into()));
    }
    let mut offsets = Vec::with_capacity(shapes.len() + 1);
    let mut total = 0;
    for (i, s) in shapes.iter().enumerate() {
        if s.inputs == 0 || s.outputs == 0 {
            return Err(Error::Network(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && shapes[i - 1].outputs != s.inputs {
            return Err(Error::Network(format!(
                "layer {i} expects {} inputs but layer {} emits {}",
                s.inputs,
                i - 1,
                shapes[i - 1].outputs
            )));
        }
        offsets.push(total);
        total += s.param_count();
    }
    offsets.push(total);
    Ok(offsets)
}

#[derive(Serialize, Deserialize)]
struct NetRecord {
    version: u32,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

impl From<DenseNet> for NetRecord {
    fn from(net: DenseNet) -> Self {
        NetRecord {
            version: FORMAT_VERSION,
            layers: net.shapes,
            params: net.params,
        }
    }
}

impl TryFrom<NetRecord> for DenseNet {
    type Error = Error;

    fn try_from(rec: NetRecord) -> Result<Self> {
        if rec.version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: rec.version,
                expected: FORMAT_VERSION,
            });
        }
        let mut net = DenseNet::zeros(rec.layers)?;
        check_len(net.params.len(), rec.params.len())?;
        net.params = rec.params;
        if !net.is_finite() {
            return Err(Error::Network("non-finite parameter".into()));
        }
        Ok(net)
    }
}

/// Adam optimiser state for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.001;

    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn for_net(net: &DenseNet) -> Self {
        Self::new(net.num_params(), Self::DEFAULT_LEARNING_RATE)
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `params` along `-grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len(self.first_moment.len(), params.len())?;
        check_len(params.len(), grads.len())?;
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= self.learning_rate * (m / c1) / ((v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// Convenience wrapper stepping a whole network.
    pub fn step_net(&mut self, net: &mut DenseNet, grads: &[f64]) -> Result<()> {
        self.step(net.params_mut(), grads)
    }
}
