//! Small fully connected networks in plain f64, with hand-written
//! backpropagation. Everything stays in 64-bit math so analytic gradients can
//! be checked against central finite differences to tight tolerances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    Tanh,
    /// scale * tanh(z): smooth, saturating, bounded to [-scale, scale].
    ScaledTanh {
        scale: f64,
    },
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            Activation::ScaledTanh { scale } => scale * z.tanh(),
        }
    }

    /// Derivative dy/dz expressed through the post-activation output y.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::ScaledTanh { scale } => scale * (1.0 - (y / scale) * (y / scale)),
        }
    }
}

/// One dense layer; weights are row-major `[output, input]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            biases: vec![0.0; output_dim],
            activation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>, // (d_weights, d_biases)
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|g| *g = 0.0);
            b.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

/// Forward pass bookkeeping for backprop: the input plus every layer's
/// post-activation output.
pub struct FwdCache {
    input: Vec<f64>,
    post: Vec<Vec<f64>>,
}

impl FwdCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("network has layers")
    }
}

impl Mlp {
    /// Fully connected network with the given layer sizes. Hidden layers use
    /// `hidden` activation, the last layer `output`. Hidden weights use a
    /// uniform fan-based init; the final layer starts near zero so fresh
    /// policies command almost no acceleration.
    pub fn new<R: Rng>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for i in 0..sizes.len() - 1 {
            let last = i == sizes.len() - 2;
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let limit = if last {
                1e-3
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let mut layer = Layer::zeros(fan_in, fan_out, if last { output } else { hidden });
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
            layers.push(layer);
        }
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("network has layers").input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("network has layers").output_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.output_dim));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(x)?;
        Ok(cache.post.pop().expect("network has layers"))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<FwdCache> {
        self.check_input(x)?;
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = x;
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.output_dim);
            for o in 0..layer.output_dim {
                let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                let mut z = layer.biases[o];
                for (w, v) in row.iter().zip(current) {
                    z += w * v;
                }
                out.push(layer.activation.apply(z));
            }
            post.push(out);
            current = post.last().expect("just pushed");
        }
        Ok(FwdCache {
            input: x.to_vec(),
            post,
        })
    }

    /// Backpropagate `out_grad` (dL/dy of the final output) through the
    /// cached forward pass. Parameter gradients are accumulated into `grads`
    /// when given; the return value is dL/dx for the network input.
    pub fn backward(
        &self,
        cache: &FwdCache,
        out_grad: &[f64],
        mut grads: Option<&mut MlpGrads>,
    ) -> Vec<f64> {
        assert_eq!(out_grad.len(), self.output_dim());
        let mut delta = out_grad.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.post[li];
            let x = if li == 0 {
                &cache.input
            } else {
                &cache.post[li - 1]
            };
            // dz = delta ⊙ act'(y)
            let mut dz = vec![0.0; layer.output_dim];
            for (j, d) in delta.iter().enumerate() {
                dz[j] = d * layer.activation.grad_from_output(y[j]);
            }
            if let Some(g) = grads.as_deref_mut() {
                let (dw, db) = &mut g.layers[li];
                for (j, &dzj) in dz.iter().enumerate() {
                    db[j] += dzj;
                    let row = &mut dw[j * layer.input_dim..(j + 1) * layer.input_dim];
                    for (slot, &xi) in row.iter_mut().zip(x) {
                        *slot += dzj * xi;
                    }
                }
            }
            let mut next = vec![0.0; layer.input_dim];
            for (j, &dzj) in dz.iter().enumerate() {
                let row = &layer.weights[j * layer.input_dim..(j + 1) * layer.input_dim];
                for (slot, &w) in next.iter_mut().zip(row) {
                    *slot += dzj * w;
                }
            }
            delta = next;
        }
        delta
    }

    /// θ_target ← τ·θ_source + (1−τ)·θ_target, elementwise.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            for (d, s) in dst.weights.iter_mut().zip(&src.weights) {
                *d = tau * s + (1.0 - tau) * *d;
            }
            for (d, s) in dst.biases.iter_mut().zip(&src.biases) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|p| p.is_finite()))
    }
}

/// Adam optimizer state for one network.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let shape = |n: &Mlp| {
            n.layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect::<Vec<_>>()
        };
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shape(net),
            v: shape(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[li];
            let (mw, mb) = &mut self.m[li];
            let (vw, vb) = &mut self.v[li];
            for i in 0..layer.weights.len() {
                mw[i] = self.beta1 * mw[i] + (1.0 - self.beta1) * gw[i];
                vw[i] = self.beta2 * vw[i] + (1.0 - self.beta2) * gw[i] * gw[i];
                layer.weights[i] -= self.lr * (mw[i] / bc1) / ((vw[i] / bc2).sqrt() + self.eps);
            }
            for i in 0..layer.biases.len() {
                mb[i] = self.beta1 * mb[i] + (1.0 - self.beta1) * gb[i];
                vb[i] = self.beta2 * vb[i] + (1.0 - self.beta2) * gb[i] * gb[i];
                layer.biases[i] -= self.lr * (mb[i] / bc1) / ((vb[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}
