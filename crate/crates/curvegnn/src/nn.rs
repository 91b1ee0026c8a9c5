//! Smooth scalar-valued MLPs, parameter plumbing, and the Adam optimizer.
//!
//! [`SmoothMlp`] is sigmoid-activated by construction — there is no activation
//! knob — so every realized function is infinitely differentiable in both its
//! inputs and its parameters, which the local variation operators require of
//! candidate functions.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{Gradients, Tape, Tensor, TensorId};
use crate::graph::VertexFeatures;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input dimension mismatch: network expects {expected}, features have {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient for parameter `{name}`")]
    NonFiniteGradient { name: String },
    #[error("gradient shape mismatch for parameter `{name}`")]
    GradientShape { name: String },
    #[error("invalid layer widths {0:?}: need at least [d_in, 1] and output width 1")]
    BadWidths(Vec<usize>),
}

/// Samples a weight matrix uniformly in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`,
/// keeping sigmoid pre-activations in their responsive range.
pub fn init_weight(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..=a)).collect();
    Tensor::matrix(rows, cols, data)
}

/// Scalar vertex function realized by a sigmoid MLP: rows of the feature
/// matrix go in, one value per vertex comes out. The final layer is linear.
#[derive(Debug, Clone)]
pub struct SmoothMlp {
    widths: Vec<usize>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl SmoothMlp {
    /// `widths` = `[d_in, h_1, ..., 1]`; the output width must be 1.
    pub fn new(widths: &[usize], rng: &mut impl Rng) -> Result<Self, NnError> {
        if widths.len() < 2 || *widths.last().unwrap() != 1 || widths.iter().any(|&w| w == 0) {
            return Err(NnError::BadWidths(widths.to_vec()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in widths.windows(2) {
            weights.push(init_weight(pair[0], pair[1], rng));
            biases.push(Tensor::zeros(&[pair[1]]));
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Plain forward pass: one scalar per vertex.
    pub fn forward(&self, features: &VertexFeatures) -> Result<Vec<f64>, NnError> {
        if features.dim() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: features.dim(),
            });
        }
        let n = features.n_vertices();
        let mut cur: Vec<f64> = features.data().to_vec();
        let mut cur_dim = features.dim();
        for (li, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let out_dim = self.widths[li + 1];
            let mut next = vec![0.0; n * out_dim];
            for x in 0..n {
                for j in 0..out_dim {
                    let mut s = b.data()[j];
                    for i in 0..cur_dim {
                        s += cur[x * cur_dim + i] * w.data()[i * out_dim + j];
                    }
                    next[x * out_dim + j] = if li + 1 < self.weights.len() {
                        1.0 / (1.0 + (-s).exp())
                    } else {
                        s
                    };
                }
            }
            cur = next;
            cur_dim = out_dim;
        }
        Ok(cur)
    }

    /// Taped forward pass over a feature matrix already on the tape.
    /// Parameters are bound as leaves under `prefix`; returns a `[n]` vector id.
    pub fn forward_taped(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        prefix: &str,
        features_id: TensorId,
    ) -> TensorId {
        let n_rows = tape.value(features_id).shape()[0];
        let mut cur = features_id;
        for (li, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let w_id = binding.bind(tape, &format!("{prefix}.layer{li}.weight"), w);
            let b_id = binding.bind(tape, &format!("{prefix}.layer{li}.bias"), b);
            let z = tape.matmul(cur, w_id);
            let z = tape.add_rows(z, b_id);
            cur = if li + 1 < self.weights.len() {
                tape.sigmoid(z)
            } else {
                z
            };
        }
        tape.reshape(cur, &[n_rows])
    }

    pub fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor)) {
        for (li, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            f(format!("{prefix}.layer{li}.weight"), w);
            f(format!("{prefix}.layer{li}.bias"), b);
        }
    }

    pub fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        for (li, (w, b)) in self
            .weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .enumerate()
        {
            f(format!("{prefix}.layer{li}.weight"), w);
            f(format!("{prefix}.layer{li}.bias"), b);
        }
    }
}

/// Records which tape leaf each named parameter was bound to during one
/// forward build, so gradients can be gathered back by name.
#[derive(Default)]
pub struct TapeBinding {
    entries: Vec<(String, TensorId)>,
}

impl TapeBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, tape: &mut Tape, name: &str, value: &Tensor) -> TensorId {
        let id = tape.leaf(value.clone());
        self.entries.push((name.to_string(), id));
        id
    }

    pub fn id_of(&self, name: &str) -> Option<TensorId> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, id)| id)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Collects gradients for every bound parameter, by name.
    pub fn gather(&self, grads: &Gradients) -> HashMap<String, Tensor> {
        let mut out = HashMap::new();
        for (name, id) in &self.entries {
            if let Ok(g) = grads.get(*id) {
                out.insert(name.clone(), g.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

struct AdamSlot {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Adam with bias correction and decoupled weight decay. Moment slots are
/// keyed by parameter name and created lazily.
pub struct OptimizerState {
    pub config: AdamConfig,
    slots: HashMap<String, AdamSlot>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            slots: HashMap::new(),
        }
    }

    /// One Adam update for a single named parameter. A missing gradient entry
    /// leaves the parameter untouched except for weight decay.
    pub fn step(
        &mut self,
        name: &str,
        param: &mut Tensor,
        grad: Option<&Tensor>,
    ) -> Result<(), NnError> {
        let c = self.config;
        if c.weight_decay > 0.0 {
            for p in param.data_mut() {
                *p -= c.lr * c.weight_decay * *p;
            }
        }
        let Some(grad) = grad else { return Ok(()) };
        if grad.numel() != param.numel() {
            return Err(NnError::GradientShape {
                name: name.to_string(),
            });
        }
        if grad.data().iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient {
                name: name.to_string(),
            });
        }
        let slot = self
            .slots
            .entry(name.to_string())
            .or_insert_with(|| AdamSlot {
                m: vec![0.0; param.numel()],
                v: vec![0.0; param.numel()],
                t: 0,
            });
        slot.t += 1;
        let bc1 = 1.0 - c.beta1.powi(slot.t as i32);
        let bc2 = 1.0 - c.beta2.powi(slot.t as i32);
        let p = param.data_mut();
        for i in 0..p.len() {
            let g = grad.data()[i];
            slot.m[i] = c.beta1 * slot.m[i] + (1.0 - c.beta1) * g;
            slot.v[i] = c.beta2 * slot.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = slot.m[i] / bc1;
            let v_hat = slot.v[i] / bc2;
            p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        Ok(())
    }
}
