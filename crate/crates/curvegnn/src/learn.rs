//! Learnable curvature estimation.
//!
//! A finite family of smooth MLP vertex functions stands in for the full
//! function space. Each candidate `f` contributes a hinge penalty
//! `max{0, κ̂(x)·Γ(f,f)(x) − Γ₂(f,f)(x)}` wherever the estimate κ̂ violates the
//! curvature-dimension inequality, and a `−λ·κ̂(x)` term pushes the estimate
//! upward. One joint gradient step per iteration updates κ̂, the family
//! members, and (optionally) log-edge-weights together.
//!
//! Because the family is a strict subset of all vertex functions, a converged
//! κ̂ with inactive hinges can only sit at or above the exact curvature; the
//! oracle in [`crate::exact`] is the reference for that upper-bound property,
//! evaluated with the same realized edge weights frozen.
//!
//! κ̂ comes in two parameterizations: transductive (one free scalar per vertex
//! of a fixed graph) and inductive (a shared MLP over vertex features, usable
//! across graphs).

use std::rc::Rc;

use thiserror::Error;

use crate::autodiff::{Tape, Tensor, TensorId};
use crate::exact::{CurvatureEstimate, Provenance};
use crate::graph::{VertexFeatures, WeightedGraph};
use crate::nn::{AdamConfig, NnError, OptimizerState, SmoothMlp, TapeBinding};
use crate::operators::{gamma2_taped, Gamma2Form};
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("curvature loss is not finite at step {step} (first bad vertex {vertex})")]
    NonFiniteLoss { step: usize, vertex: usize },
    #[error("graph has isolated vertices {0:?}; their curvature constraint is empty")]
    IsolatedVertices(Vec<usize>),
    #[error("feature rows {got} do not match vertex count {want}")]
    FeatureRows { got: usize, want: usize },
}

/// Hinge penalty for one vertex and one candidate function:
/// `max{0, κ̂·Γ − Γ₂}`; zero exactly when the inequality holds.
pub fn penalty(kappa_hat: f64, gamma_x: f64, gamma2_x: f64) -> f64 {
    (kappa_hat * gamma_x - gamma2_x).max(0.0)
}

/// The candidate family ℱ: independently initialized smooth MLPs sharing an
/// input dimension.
#[derive(Debug, Clone)]
pub struct FunctionFamily {
    members: Vec<SmoothMlp>,
}

impl FunctionFamily {
    pub fn new(
        n_functions: usize,
        input_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self, LearnError> {
        let mut members = Vec::with_capacity(n_functions);
        for i in 0..n_functions {
            let mut rng = stream(seed, "family", i as u64);
            members.push(SmoothMlp::new(&[input_dim, hidden, 1], &mut rng)?);
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[SmoothMlp] {
        &self.members
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(String, &Tensor)) {
        for (i, m) in self.members.iter().enumerate() {
            m.visit_params(&format!("family.{i}"), f);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor)) {
        for (i, m) in self.members.iter_mut().enumerate() {
            m.visit_params_mut(&format!("family.{i}"), f);
        }
    }
}

/// How κ̂ is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaMode {
    /// One free scalar per vertex of the fixed graph.
    #[default]
    Transductive,
    /// κ̂ = MLP(vertex features), shared across graphs.
    Inductive,
}

#[derive(Debug, Clone)]
enum KappaParams {
    Transductive(Tensor),
    Inductive(SmoothMlp),
}

/// Parameters of the curvature estimator: κ̂ (either form), the tradeoff
/// constant λ, and optional learnable log-edge-weights aligned with the
/// graph's canonical edge list.
#[derive(Debug, Clone)]
pub struct LearnedCurvatureParams {
    kappa: KappaParams,
    pub lambda: f64,
    log_edge_weights: Option<Tensor>,
}

impl LearnedCurvatureParams {
    /// Transductive κ̂ initialized to zero.
    pub fn transductive(n_vertices: usize, lambda: f64) -> Self {
        Self {
            kappa: KappaParams::Transductive(Tensor::vector(vec![0.0; n_vertices])),
            lambda,
            log_edge_weights: None,
        }
    }

    /// Inductive κ̂ computed by a fresh MLP over vertex features.
    pub fn inductive(
        input_dim: usize,
        hidden: usize,
        lambda: f64,
        seed: u64,
    ) -> Result<Self, LearnError> {
        let mut rng = stream(seed, "kappa-net", 0);
        Ok(Self {
            kappa: KappaParams::Inductive(SmoothMlp::new(&[input_dim, hidden, 1], &mut rng)?),
            lambda,
            log_edge_weights: None,
        })
    }

    /// Makes edge weights learnable, seeded from the graph's current weights
    /// in log-space so realized weights stay strictly positive.
    pub fn enable_learnable_weights(&mut self, g: &WeightedGraph) {
        let logw: Vec<f64> = g.weights().iter().map(|w| w.ln()).collect();
        self.log_edge_weights = Some(Tensor::vector(logw));
    }

    pub fn weights_are_learnable(&self) -> bool {
        self.log_edge_weights.is_some()
    }

    /// Current realized edge weights: `exp(log w)` when learnable, otherwise
    /// the graph's own weights.
    pub fn realized_weights(&self, g: &WeightedGraph) -> Vec<f64> {
        match &self.log_edge_weights {
            Some(lw) => lw.data().iter().map(|l| l.exp()).collect(),
            None => g.weights().to_vec(),
        }
    }

    /// Current κ̂ values as plain numbers.
    pub fn kappa_values(&self, features: &VertexFeatures) -> Result<Vec<f64>, LearnError> {
        match &self.kappa {
            KappaParams::Transductive(t) => Ok(t.data().to_vec()),
            KappaParams::Inductive(mlp) => Ok(mlp.forward(features)?),
        }
    }

    /// Binds the realized weight vector on the tape: an `exp` of the log-weight
    /// leaf when learnable, a constant otherwise.
    pub fn bind_weights(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        g: &WeightedGraph,
    ) -> TensorId {
        match &self.log_edge_weights {
            Some(lw) => {
                let lw_id = binding.bind(tape, "log_edge_weights", lw);
                tape.exp(lw_id)
            }
            None => tape.constant(Tensor::vector(g.weights().to_vec())),
        }
    }

    /// Binds κ̂ on the tape as a length-n vector.
    pub fn bind_kappa(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        features_id: TensorId,
    ) -> TensorId {
        match &self.kappa {
            KappaParams::Transductive(t) => binding.bind(tape, "kappa_hat", t),
            KappaParams::Inductive(mlp) => {
                mlp.forward_taped(tape, binding, "kappa_net", features_id)
            }
        }
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(String, &Tensor)) {
        match &self.kappa {
            KappaParams::Transductive(t) => f("kappa_hat".to_string(), t),
            KappaParams::Inductive(mlp) => mlp.visit_params("kappa_net", f),
        }
        if let Some(lw) = &self.log_edge_weights {
            f("log_edge_weights".to_string(), lw);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor)) {
        match &mut self.kappa {
            KappaParams::Transductive(t) => f("kappa_hat".to_string(), t),
            KappaParams::Inductive(mlp) => mlp.visit_params_mut("kappa_net", f),
        }
        if let Some(lw) = &mut self.log_edge_weights {
            f("log_edge_weights".to_string(), lw);
        }
    }
}

/// Ids of interest from one curvature-loss build.
pub struct CurvatureLossBuild {
    pub loss: TensorId,
    pub kappa: TensorId,
    pub weights: TensorId,
}

/// Builds the taped curvature loss
/// `Σ_x ( Σ_{f ∈ ℱ} max{0, κ̂(x)Γ(f)(x) − Γ₂(f)(x)} − λ κ̂(x) )`.
///
/// Gradients flow to κ̂, to every family member, and to the log-edge-weights
/// when `weights_id` descends from a learnable leaf. `features_id` must be a
/// `[n, d]` tape node.
pub fn build_curvature_loss(
    tape: &mut Tape,
    binding: &mut TapeBinding,
    graph: &Rc<WeightedGraph>,
    family: &FunctionFamily,
    params: &LearnedCurvatureParams,
    features_id: TensorId,
    weights_id: TensorId,
    form: Gamma2Form,
) -> CurvatureLossBuild {
    let kappa = params.bind_kappa(tape, binding, features_id);
    let mut penalty_sum: Option<TensorId> = None;
    for (i, member) in family.members().iter().enumerate() {
        let f = member.forward_taped(tape, binding, &format!("family.{i}"), features_id);
        let gam = tape.graph_gamma(graph, f, f, weights_id);
        let gam2 = gamma2_taped(tape, graph, f, weights_id, form);
        let lhs = tape.mul(kappa, gam);
        let viol = tape.sub(lhs, gam2);
        let pen = tape.relu(viol);
        penalty_sum = Some(match penalty_sum {
            None => pen,
            Some(acc) => tape.add(acc, pen),
        });
    }
    let kappa_sum = tape.sum(kappa);
    let reg = tape.scale(kappa_sum, params.lambda);
    let loss = match penalty_sum {
        Some(pen) => {
            let total_pen = tape.sum(pen);
            tape.sub(total_pen, reg)
        }
        None => tape.neg(reg),
    };
    CurvatureLossBuild {
        loss,
        kappa,
        weights: weights_id,
    }
}

#[derive(Debug, Clone)]
pub struct LearnConfig {
    /// Family size N.
    pub n_functions: usize,
    pub lambda: f64,
    /// Joint gradient steps.
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Hidden width of each family member (and of the inductive κ̂ net).
    pub hidden: usize,
    pub mode: KappaMode,
    /// Train family members adversarially (false keeps them frozen samples).
    pub train_family: bool,
    /// Learn log-edge-weights jointly (false freezes the graph's weights).
    pub learn_weights: bool,
    pub gamma2_form: Gamma2Form,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            n_functions: 3,
            lambda: 1.0,
            epochs: 2000,
            lr: 0.01,
            seed: 0,
            hidden: 16,
            mode: KappaMode::Transductive,
            train_family: true,
            learn_weights: false,
            gamma2_form: Gamma2Form::Operator,
        }
    }
}

/// Result of [`estimate_curvature`]: κ̂ per vertex plus the realized edge
/// weights frozen for oracle cross-checks.
#[derive(Debug)]
pub struct LearnOutcome {
    pub estimate: CurvatureEstimate,
    pub realized_weights: Vec<f64>,
    pub family: FunctionFamily,
    pub params: LearnedCurvatureParams,
    /// Curvature loss per step.
    pub history: Vec<f64>,
}

/// Runs the joint optimization and returns per-vertex κ̂ (provenance
/// `learned`). Deterministic for a fixed seed.
pub fn estimate_curvature(
    g: &Rc<WeightedGraph>,
    features: &VertexFeatures,
    config: &LearnConfig,
) -> Result<LearnOutcome, LearnError> {
    let n = g.n_vertices();
    if features.n_vertices() != n {
        return Err(LearnError::FeatureRows {
            got: features.n_vertices(),
            want: n,
        });
    }
    let isolated: Vec<usize> = (0..n).filter(|&x| g.degree(x) == 0).collect();
    if !isolated.is_empty() {
        return Err(LearnError::IsolatedVertices(isolated));
    }

    let mut family = FunctionFamily::new(
        config.n_functions,
        features.dim(),
        config.hidden,
        config.seed,
    )?;
    let mut params = match config.mode {
        KappaMode::Transductive => LearnedCurvatureParams::transductive(n, config.lambda),
        KappaMode::Inductive => LearnedCurvatureParams::inductive(
            features.dim(),
            config.hidden,
            config.lambda,
            config.seed,
        )?,
    };
    if config.learn_weights {
        params.enable_learnable_weights(g);
    }

    let mut opt = OptimizerState::new(AdamConfig::with_lr(config.lr));
    let mut history = Vec::with_capacity(config.epochs);
    let features_tensor = Tensor::matrix(n, features.dim(), features.data().to_vec());

    for step in 0..config.epochs {
        let mut tape = Tape::new();
        let mut binding = TapeBinding::new();
        let features_id = tape.constant(features_tensor.clone());
        let weights_id = params.bind_weights(&mut tape, &mut binding, g);
        let build = build_curvature_loss(
            &mut tape,
            &mut binding,
            g,
            &family,
            &params,
            features_id,
            weights_id,
            config.gamma2_form,
        );
        let loss_val = tape.value(build.loss).item();
        if !loss_val.is_finite() {
            let kappa_vals = tape.value(build.kappa).data();
            let vertex = kappa_vals.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(LearnError::NonFiniteLoss { step, vertex });
        }
        history.push(loss_val);

        let grads = tape.backward(build.loss).expect("scalar loss");
        let by_name = binding.gather(&grads);

        let mut step_err: Option<NnError> = None;
        params.visit_params_mut(&mut |name, t| {
            if step_err.is_none() {
                if let Err(e) = opt.step(&name, t, by_name.get(&name)) {
                    step_err = Some(e);
                }
            }
        });
        if config.train_family {
            family.visit_params_mut(&mut |name, t| {
                if step_err.is_none() {
                    if let Err(e) = opt.step(&name, t, by_name.get(&name)) {
                        step_err = Some(e);
                    }
                }
            });
        }
        if let Some(e) = step_err {
            return Err(e.into());
        }
    }

    let values = params.kappa_values(features)?;
    let realized_weights = params.realized_weights(g);
    Ok(LearnOutcome {
        estimate: CurvatureEstimate {
            values,
            provenance: Provenance::Learned,
        },
        realized_weights,
        family,
        params,
        history,
    })
}
