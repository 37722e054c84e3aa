//! Dense layers, binary cross-entropy and Adam.
//!
//! Layers only describe a layout. Their weights live in the owning model's
//! flat parameter vector as `out_dim × in_dim` row-major weights followed by
//! `out_dim` biases, so quantum and classical parameters share one optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.01;

/// Probabilities are clamped to `[P_EPS, 1 - P_EPS]` before taking logs.
pub const P_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Identity,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Values kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct DenseCache {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("dense layer dimensions must be positive"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
        })
    }

    pub fn n_params(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R) {
        let limit = (6.0 / (self.in_dim + self.out_dim) as f64).sqrt();
        let (w, b) = params.split_at_mut(self.in_dim * self.out_dim);
        for v in w {
            *v = rng.random_range(-limit..=limit);
        }
        b.fill(0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len("dense layer parameters", self.n_params(), params.len())?;
        check_len("dense layer input", self.in_dim, x.len())?;
        Ok(self.forward_cached(params, x).out)
    }

    pub(crate) fn forward_cached(&self, params: &[f64], x: &[f64]) -> DenseCache {
        let (w, b) = params.split_at(self.in_dim * self.out_dim);
        let pre: Vec<f64> = w
            .chunks_exact(self.in_dim)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + bias)
            .collect();
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        DenseCache { pre, out }
    }

    /// Accumulates parameter gradients into `grad_params` and returns `∂L/∂x`.
    pub(crate) fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &DenseCache,
        grad_out: &[f64],
        grad_params: &mut [f64],
    ) -> Vec<f64> {
        let n_w = self.in_dim * self.out_dim;
        let (w, _) = params.split_at(n_w);
        let (gw, gb) = grad_params.split_at_mut(n_w);
        let mut grad_x = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let dz = grad_out[o] * self.activation.derivative(cache.pre[o], cache.out[o]);
            gb[o] += dz;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                gw[row + i] += dz * x[i];
                grad_x[i] += dz * w[row + i];
            }
        }
        grad_x
    }
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped away from 0 and 1.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(P_EPS, 1.0 - P_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// `∂ bce / ∂p`, evaluated at the clamped probability. It stays nonzero when
/// the output saturates so a confidently wrong prediction still gets pushed back.
pub fn bce_grad(p: f64, y: f64) -> f64 {
    let p = p.clamp(P_EPS, 1.0 - P_EPS);
    -y / p + (1.0 - y) / (1.0 - p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 0.01;

    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One bias-corrected Adam update. Rejects non-finite gradients before touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len("adam parameters", self.m.len(), params.len())?;
        check_len("adam gradients", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {i} is {} at optimizer step {}",
                grads[i],
                self.t + 1
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} diverged at optimizer step {}", self.t)));
        }
        Ok(())
    }
}
