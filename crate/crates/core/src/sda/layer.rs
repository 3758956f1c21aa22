use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Linear,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Linear => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Linear),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Tied-weight denoising autoencoder layer: `q = f(W p + b)`, `r = g(W^T q + b')`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoisingLayer {
    pub input: usize,
    pub hidden: usize,
    /// `hidden x input`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub b_prime: Vec<f64>,
    pub activation: Activation,
    pub reconstruction: Activation,
}

/// Gradients of the layer loss with respect to `W`, `b` and `b'`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub b_prime: Vec<f64>,
}

impl LayerGradients {
    fn zeros(layer: &DenoisingLayer) -> Self {
        LayerGradients {
            w: vec![0.0; layer.w.len()],
            b: vec![0.0; layer.hidden],
            b_prime: vec![0.0; layer.input],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl DenoisingLayer {
    /// Glorot-uniform weights, zero biases, sigmoid hidden units, linear reconstruction.
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + hidden) as f64).sqrt();
        DenoisingLayer {
            input,
            hidden,
            w: (0..input * hidden).map(|_| rng.random_range(-limit..limit)).collect(),
            b: vec![0.0; hidden],
            b_prime: vec![0.0; input],
            activation: Activation::Sigmoid,
            reconstruction: Activation::Linear,
        }
    }

    /// Square linear layer with `W = I`, zero biases.
    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        for k in 0..n {
            w[k * n + k] = 1.0;
        }
        DenoisingLayer {
            input: n,
            hidden: n,
            w,
            b: vec![0.0; n],
            b_prime: vec![0.0; n],
            activation: Activation::Linear,
            reconstruction: Activation::Linear,
        }
    }

    pub(crate) fn row(&self, h: usize) -> &[f64] {
        &self.w[h * self.input..(h + 1) * self.input]
    }

    pub fn encode(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.input {
            return Err(Error::DimensionMismatch {
                expected: self.input,
                got: p.len(),
            });
        }
        Ok((0..self.hidden)
            .map(|h| self.activation.apply(dot(self.row(h), p) + self.b[h]))
            .collect())
    }

    pub fn decode(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.hidden {
            return Err(Error::DimensionMismatch {
                expected: self.hidden,
                got: q.len(),
            });
        }
        let mut z = self.b_prime.clone();
        for (h, &qh) in q.iter().enumerate() {
            axpy(qh, self.row(h), &mut z);
        }
        for v in &mut z {
            *v = self.reconstruction.apply(*v);
        }
        Ok(z)
    }

    pub fn reconstruct(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(p)?)
    }

    pub fn weight_norm_sq(&self) -> f64 {
        dot(&self.w, &self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).chain(&self.b_prime).all(|v| v.is_finite())
    }
}

fn check_batch(layer: &DenoisingLayer, clean: &[Vec<f64>], corrupted: &[Vec<f64>]) -> Result<()> {
    if clean.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    if clean.len() != corrupted.len() {
        return Err(Error::DimensionMismatch {
            expected: clean.len(),
            got: corrupted.len(),
        });
    }
    for v in clean.iter().chain(corrupted) {
        if v.len() != layer.input {
            return Err(Error::DimensionMismatch {
                expected: layer.input,
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `L = 1/(2G) sum_g |r(p~_g) - p_g|^2 + lambda/2 sum W^2`, reconstructing the
/// corrupted inputs and comparing against the clean ones.
pub fn layer_loss(
    layer: &DenoisingLayer,
    clean: &[Vec<f64>],
    corrupted: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    check_batch(layer, clean, corrupted)?;
    let mut sq = 0.0;
    for (p, pt) in clean.iter().zip(corrupted) {
        let r = layer.reconstruct(pt)?;
        sq += r.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(sq / (2.0 * clean.len() as f64) + 0.5 * lambda * layer.weight_norm_sq())
}

/// Loss and its exact gradients by backpropagation through the tied weights.
pub fn layer_gradients(
    layer: &DenoisingLayer,
    clean: &[Vec<f64>],
    corrupted: &[Vec<f64>],
    lambda: f64,
) -> Result<(f64, LayerGradients)> {
    check_batch(layer, clean, corrupted)?;
    let mut grads = LayerGradients::zeros(layer);
    let g = clean.len() as f64;
    let mut sq = 0.0;
    let mut delta_z = vec![0.0; layer.input];
    for (p, pt) in clean.iter().zip(corrupted) {
        let q = layer.encode(pt)?;
        let r = layer.decode(&q)?;
        for k in 0..layer.input {
            let e = r[k] - p[k];
            sq += e * e;
            delta_z[k] = e / g * layer.reconstruction.derivative_from_output(r[k]);
        }
        axpy(1.0, &delta_z, &mut grads.b_prime);
        for h in 0..layer.hidden {
            let row = layer.row(h);
            let delta_a = dot(row, &delta_z) * layer.activation.derivative_from_output(q[h]);
            grads.b[h] += delta_a;
            let gw = &mut grads.w[h * layer.input..(h + 1) * layer.input];
            // decoder path q_h * dz, encoder path da_h * p~
            for k in 0..layer.input {
                gw[k] += q[h] * delta_z[k] + delta_a * pt[k];
            }
        }
    }
    axpy(lambda, &layer.w, &mut grads.w);
    let loss = sq / (2.0 * g) + 0.5 * lambda * layer.weight_norm_sq();
    Ok((loss, grads))
}
