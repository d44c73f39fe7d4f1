//! Feed-forward network primitives and the task classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{softmax, Matrix, RngStream};

/// Elementwise activation of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => pre.max(0.0),
            Activation::Identity => pre,
            Activation::Sigmoid => 1.0 / (1.0 + (-pre).exp()),
        }
    }

    /// Derivative at `pre`, given the already-computed activation value.
    #[inline]
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => post * (1.0 - post),
        }
    }
}

/// One dense layer: `post = activation(W·x + b)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Random initialization: He-scaled normals for ReLU layers, Xavier
    /// otherwise, zero biases.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut RngStream) -> Self {
        let std = match activation {
            Activation::Relu => (2.0 / inputs as f64).sqrt(),
            _ => (1.0 / inputs as f64).sqrt(),
        };
        let mut weights = Matrix::zeros(outputs, inputs);
        for v in weights.data_mut() {
            *v = std * rng.normal();
        }
        DenseLayer { weights, bias: vec![0.0; outputs], activation }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn n_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace of a nonempty network")
    }
}

/// A plain multi-layer perceptron.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Builds `sizes[0] → sizes[1] → …` with ReLU on all but the last layer,
    /// which gets `final_activation`.
    pub fn init(sizes: &[usize], final_activation: Activation, rng: &mut RngStream) -> Self {
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { final_activation } else { Activation::Relu };
                DenseLayer::init(w[0], w[1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(DenseLayer::inputs).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(DenseLayer::outputs).unwrap_or(0)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        for layer in &self.layers {
            let mut z = layer.weights.mul_vec(cur)?;
            for (zi, bi) in z.iter_mut().zip(&layer.bias) {
                *zi += bi;
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
            cur = post.last().unwrap();
        }
        Ok(ForwardTrace { input: x.to_vec(), pre, post })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.post.pop().expect("nonempty network"))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// Appends all parameters (per layer: weights row-major, then bias).
    pub fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.bias);
        }
    }

    /// Loads parameters written by [`write_params`](Self::write_params);
    /// returns how many values were consumed.
    pub fn read_params(&mut self, src: &[f64]) -> Result<usize> {
        if src.len() < self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: src.len() });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let w = layer.weights.data_mut();
            w.copy_from_slice(&src[at..at + w.len()]);
            at += w.len();
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&src[at..at + b]);
            at += b;
        }
        Ok(at)
    }

    /// Backpropagates from `d_pre` = ∂L/∂(pre-activation of the last layer),
    /// accumulating parameter gradients into `grads[offset..]` (laid out as
    /// in [`write_params`](Self::write_params)) and returning ∂L/∂input.
    pub fn backward_from_last_pre(
        &self,
        trace: &ForwardTrace,
        d_pre_last: Vec<f64>,
        grads: &mut [f64],
        offset: usize,
    ) -> Result<Vec<f64>> {
        let mut layer_offsets = Vec::with_capacity(self.layers.len());
        let mut at = offset;
        for layer in &self.layers {
            layer_offsets.push(at);
            at += layer.n_params();
        }

        let mut d_pre = d_pre_last;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let inputs: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let base = layer_offsets[l];
            let cols = layer.inputs();
            for (r, &dp) in d_pre.iter().enumerate() {
                let row = &mut grads[base + r * cols..base + (r + 1) * cols];
                for (g, &x) in row.iter_mut().zip(inputs) {
                    *g += dp * x;
                }
            }
            let bias_base = base + layer.outputs() * cols;
            for (r, &dp) in d_pre.iter().enumerate() {
                grads[bias_base + r] += dp;
            }
            let d_post_prev = layer.weights.mul_vec_transposed(&d_pre)?;
            if l == 0 {
                return Ok(d_post_prev);
            }
            let prev = &self.layers[l - 1];
            d_pre = d_post_prev
                .iter()
                .zip(&trace.pre[l - 1])
                .zip(&trace.post[l - 1])
                .map(|((&d, &p), &a)| d * prev.activation.derivative(p, a))
                .collect();
        }
        unreachable!("network has at least one layer");
    }

    /// Propagates `d_post` = ∂L/∂(post-activation of layer `layer`) down to
    /// ∂L/∂input, without touching parameter gradients.
    pub fn input_grad_from_post(
        &self,
        trace: &ForwardTrace,
        layer: usize,
        d_post: Vec<f64>,
    ) -> Result<Vec<f64>> {
        let mut d = d_post;
        for l in (0..=layer).rev() {
            let lay = &self.layers[l];
            let d_pre: Vec<f64> = d
                .iter()
                .zip(&trace.pre[l])
                .zip(&trace.post[l])
                .map(|((&g, &p), &a)| g * lay.activation.derivative(p, a))
                .collect();
            d = lay.weights.mul_vec_transposed(&d_pre)?;
        }
        Ok(d)
    }
}

/// Input-space objective for gradient-based preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputObjective {
    /// `−log softmax(logits / T)[class]`
    NegLogSoftmax { class: usize, temperature: f64 },
}

/// Task classifier: ReLU hidden layers feeding identity-activated logits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub mlp: Mlp,
    /// Task-class ids in logit order.
    pub classes: Vec<i32>,
}

impl ClassifierModel {
    /// Randomly initialized classifier with the given hidden widths.
    pub fn init(input_dim: usize, hidden: &[usize], classes: Vec<i32>, rng: &mut RngStream) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(classes.len());
        ClassifierModel { mlp: Mlp::init(&sizes, Activation::Identity, rng), classes }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.mlp.layers.len() - 1
    }

    /// Returns `(penultimate features, logits)`. With no hidden layers the
    /// input itself is the penultimate feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.mlp.forward_trace(x)?;
        let n = trace.post.len();
        let penultimate =
            if n >= 2 { trace.post[n - 2].clone() } else { trace.input.clone() };
        Ok((penultimate, trace.post.into_iter().last().unwrap()))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.1)
    }

    /// Post-activation values of every hidden layer, in depth order.
    pub fn hidden_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut trace = self.mlp.forward_trace(x)?;
        trace.post.pop();
        Ok(trace.post)
    }

    /// ∂objective/∂x by backpropagation.
    pub fn input_gradient(&self, x: &[f64], objective: InputObjective) -> Result<Vec<f64>> {
        let InputObjective::NegLogSoftmax { class, temperature } = objective;
        let trace = self.mlp.forward_trace(x)?;
        let logits = trace.output();
        if class >= logits.len() {
            return Err(Error::BadArgument(format!(
                "class {class} out of range for {} logits",
                logits.len()
            )));
        }
        let p = softmax(logits, temperature)?;
        let d_logits: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(k, &pk)| (pk - if k == class { 1.0 } else { 0.0 }) / temperature)
            .collect();
        self.mlp.input_grad_from_post(&trace, self.mlp.layers.len() - 1, d_logits)
    }

    /// Chains `d_hidden` = ∂g/∂(hidden layer `layer`'s activations) down to
    /// ∂g/∂x, for objectives defined on hidden features.
    pub fn input_gradient_from_hidden(
        &self,
        x: &[f64],
        layer: usize,
        d_hidden: &[f64],
    ) -> Result<Vec<f64>> {
        if layer >= self.n_hidden_layers() {
            return Err(Error::BadArgument(format!(
                "hidden layer {layer} out of range for {} hidden layers",
                self.n_hidden_layers()
            )));
        }
        let trace = self.mlp.forward_trace(x)?;
        self.mlp.input_grad_from_post(&trace, layer, d_hidden.to_vec())
    }
}
