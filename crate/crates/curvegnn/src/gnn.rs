//! Curvature-ranked stopping depths and depth-adaptive message passing.
//!
//! Each vertex gets a stopping depth from its curvature rank: with threshold
//! `k%`, `T(x)` is the smallest `t` such that the fraction of vertices with
//! curvature at least `κ(x)` is ≤ `k·t/100` (ties share the same fraction and
//! hence the same depth). High-curvature vertices stop early, low-curvature
//! ones aggregate longer.
//!
//! During message passing a vertex `x` updates only while `t ≤ T(x)`; after
//! that its state is frozen, and neighbors keep reading the frozen value:
//! the layer-`t` message aggregates `h_y^(min{t−1, T(y)})`. Updates pair the
//! previous self state with the current message. Uniform depths reproduce the
//! standard fixed-depth network exactly.
//!
//! Training minimizes task loss plus the curvature loss of [`crate::learn`];
//! depths are recomputed from the current κ̂ on a configurable refresh period
//! (the rank threshold itself is not differentiable, so κ̂ learns only through
//! the curvature loss).

use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, Normal, Pareto};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor, TensorId};
use crate::graph::{VertexFeatures, WeightedGraph};
use crate::learn::{
    build_curvature_loss, FunctionFamily, KappaMode, LearnError, LearnedCurvatureParams,
};
use crate::nn::{init_weight, AdamConfig, NnError, OptimizerState, TapeBinding};
use crate::operators::Gamma2Form;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("depth assignment on an empty graph")]
    EmptyGraph,
    #[error("threshold k = {0} outside (0, 100]")]
    BadThreshold(f64),
    #[error("curvature value at vertex {0} is NaN")]
    KappaNaN(usize),
    #[error("assigned depth {depth} exceeds model layer count {layers}")]
    DepthExceedsLayers { depth: usize, layers: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("expected {want} labels, got {got}")]
    LabelLength { got: usize, want: usize },
    #[error("feature rows {got} do not match vertex count {want}")]
    FeatureRows { got: usize, want: usize },
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Per-vertex stopping depths derived from curvature ranks.
#[derive(Debug, Clone)]
pub struct DepthAssignment {
    pub depths: Vec<usize>,
    pub k: f64,
    pub max_depth: usize,
}

impl DepthAssignment {
    pub fn max_assigned(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &d in &self.depths {
            *counts.entry(d).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

fn rank_fractions(kappa: &[f64]) -> Result<Vec<f64>, GnnError> {
    let n = kappa.len();
    if n == 0 {
        return Err(GnnError::EmptyGraph);
    }
    if let Some(x) = kappa.iter().position(|v| v.is_nan()) {
        return Err(GnnError::KappaNaN(x));
    }
    // sorted descending; #{y : κ(y) ≥ κ(x)} is a prefix length
    let mut sorted = kappa.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(kappa
        .iter()
        .map(|&v| {
            let count = sorted.partition_point(|&y| y >= v);
            count as f64 / n as f64
        })
        .collect())
}

/// Stopping depths for a fixed threshold `k%`, capped at `max_depth`.
/// Flagged vertices (`−∞` curvature) rank deepest.
pub fn assign_depths(kappa: &[f64], k: f64, max_depth: usize) -> Result<DepthAssignment, GnnError> {
    if !(k > 0.0 && k <= 100.0) {
        return Err(GnnError::BadThreshold(k));
    }
    if max_depth == 0 {
        return Err(GnnError::BadConfig("max_depth must be at least 1".into()));
    }
    let fractions = rank_fractions(kappa)?;
    let depths = fractions
        .iter()
        .map(|&p| {
            let mut t = 1usize;
            while t < max_depth && p > k * t as f64 / 100.0 {
                t += 1;
            }
            t
        })
        .collect();
    Ok(DepthAssignment {
        depths,
        k,
        max_depth,
    })
}

/// How the per-layer thresholds are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdSchedule {
    /// The same `k` at every layer.
    #[default]
    Fixed,
    /// Per-layer thresholds sampled from a Pareto tail with mean `k`.
    PowerLaw,
    /// Per-layer thresholds sampled from N(k, (k/4)²), clamped to (0, 100].
    Normal,
    /// Thresholds increasing linearly across layers with mean `k`.
    Linear,
}

impl ThresholdSchedule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(Self::Fixed),
            "power-law" | "powerlaw" => Some(Self::PowerLaw),
            "normal" => Some(Self::Normal),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::PowerLaw => "power-law",
            Self::Normal => "normal",
            Self::Linear => "linear",
        }
    }
}

/// Per-layer thresholds `k_1..k_L`; sampled variants derive their stream from
/// the experiment seed.
pub fn layer_thresholds(
    schedule: ThresholdSchedule,
    k: f64,
    max_depth: usize,
    seed: u64,
) -> Vec<f64> {
    let clamp = |v: f64| v.clamp(0.1, 100.0);
    match schedule {
        ThresholdSchedule::Fixed => vec![k; max_depth],
        ThresholdSchedule::Linear => (1..=max_depth)
            .map(|t| clamp(k * 2.0 * t as f64 / (max_depth as f64 + 1.0)))
            .collect(),
        ThresholdSchedule::PowerLaw => {
            let mut rng = stream(seed, "threshold-schedule", 0);
            // Pareto(α = 2.5) scaled so the mean equals k.
            let alpha = 2.5;
            let x_m = k * (alpha - 1.0) / alpha;
            let pareto = Pareto::new(x_m, alpha).expect("valid pareto");
            (0..max_depth)
                .map(|_| clamp(pareto.sample(&mut rng)))
                .collect()
        }
        ThresholdSchedule::Normal => {
            let mut rng = stream(seed, "threshold-schedule", 0);
            let normal = Normal::new(k, k / 4.0).expect("valid normal");
            (0..max_depth)
                .map(|_| clamp(normal.sample(&mut rng)))
                .collect()
        }
    }
}

/// Stopping depths under per-layer thresholds: `T(x)` is the smallest `t`
/// with rank fraction ≤ `(k_1 + … + k_t)/100`, capped at the layer count.
pub fn assign_depths_scheduled(
    kappa: &[f64],
    thresholds: &[f64],
) -> Result<DepthAssignment, GnnError> {
    if thresholds.is_empty() {
        return Err(GnnError::BadConfig("empty threshold schedule".into()));
    }
    if let Some(&bad) = thresholds.iter().find(|&&t| !(t > 0.0 && t <= 100.0)) {
        return Err(GnnError::BadThreshold(bad));
    }
    let max_depth = thresholds.len();
    let fractions = rank_fractions(kappa)?;
    let mut cumulative = Vec::with_capacity(max_depth);
    let mut acc = 0.0;
    for &t in thresholds {
        acc += t;
        cumulative.push(acc / 100.0);
    }
    let depths = fractions
        .iter()
        .map(|&p| {
            let mut t = 1usize;
            while t < max_depth && p > cumulative[t - 1] {
                t += 1;
            }
            t
        })
        .collect();
    Ok(DepthAssignment {
        depths,
        k: thresholds[0],
        max_depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    /// Degree-normalized weighted mean, then linear + ReLU.
    GcnMean,
    /// Weighted sum, then a two-layer MLP.
    GinSum,
}

impl Aggregator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gcn-mean" | "gcn" => Some(Self::GcnMean),
            "gin-sum" | "gin" => Some(Self::GinSum),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::GcnMean => "gcn-mean",
            Self::GinSum => "gin-sum",
        }
    }
}

#[derive(Debug, Clone)]
enum LayerParams {
    Gcn {
        w_self: Tensor,
        w_neigh: Tensor,
        bias: Tensor,
    },
    Gin {
        w1: Tensor,
        b1: Tensor,
        w2: Tensor,
        b2: Tensor,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    NodeClassification,
    NodeRegression,
    GraphClassification,
    GraphRegression,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "node-class" => Some(Self::NodeClassification),
            "node-reg" => Some(Self::NodeRegression),
            "graph-class" => Some(Self::GraphClassification),
            "graph-reg" => Some(Self::GraphRegression),
            _ => None,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Self::NodeClassification | Self::GraphClassification)
    }

    pub fn is_graph_level(&self) -> bool {
        matches!(self, Self::GraphClassification | Self::GraphRegression)
    }
}

/// Task targets. Node tasks carry one value per vertex; graph tasks one value
/// for the whole graph (readout is the mean of final vertex states).
#[derive(Debug, Clone)]
pub enum Labels {
    NodeClass(Vec<usize>),
    NodeReg(Vec<f64>),
    GraphClass(usize),
    GraphReg(f64),
}

/// Train/eval masks for node-level tasks; ignored by graph-level tasks.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<bool>,
    pub eval: Vec<bool>,
}

impl Splits {
    pub fn all_train(n: usize) -> Self {
        Self {
            train: vec![true; n],
            eval: vec![false; n],
        }
    }

    /// Random train/eval split with the given train fraction.
    pub fn random(n: usize, train_fraction: f64, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream(seed, "split", 0);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_train = ((n as f64) * train_fraction).round() as usize;
        let mut train = vec![false; n];
        let mut eval = vec![false; n];
        for (rank, &x) in order.iter().enumerate() {
            if rank < n_train {
                train[x] = true;
            } else {
                eval[x] = true;
            }
        }
        Self { train, eval }
    }
}

/// Depth-adaptive message-passing network with a task head.
#[derive(Debug, Clone)]
pub struct GnnModel {
    pub aggregator: Aggregator,
    layers: Vec<LayerParams>,
    head_w: Tensor,
    head_b: Tensor,
    pub input_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
}

impl GnnModel {
    pub fn new(
        aggregator: Aggregator,
        input_dim: usize,
        hidden: usize,
        n_layers: usize,
        out_dim: usize,
        seed: u64,
    ) -> Result<Self, GnnError> {
        if n_layers == 0 || hidden == 0 || input_dim == 0 || out_dim == 0 {
            return Err(GnnError::BadConfig("dimensions must be positive".into()));
        }
        let mut rng = stream(seed, "gnn-init", 0);
        let mut layers = Vec::with_capacity(n_layers);
        for li in 0..n_layers {
            let d_in = if li == 0 { input_dim } else { hidden };
            layers.push(match aggregator {
                Aggregator::GcnMean => LayerParams::Gcn {
                    w_self: init_weight(d_in, hidden, &mut rng),
                    w_neigh: init_weight(d_in, hidden, &mut rng),
                    bias: Tensor::zeros(&[hidden]),
                },
                Aggregator::GinSum => LayerParams::Gin {
                    w1: init_weight(d_in, hidden, &mut rng),
                    b1: Tensor::zeros(&[hidden]),
                    w2: init_weight(hidden, hidden, &mut rng),
                    b2: Tensor::zeros(&[hidden]),
                },
            });
        }
        // zero head start: predictions begin at 0 and the first optimizer
        // steps move them smoothly toward the targets
        let head_w = Tensor::zeros(&[hidden, out_dim]);
        let head_b = Tensor::zeros(&[out_dim]);
        Ok(Self {
            aggregator,
            layers,
            head_w,
            head_b,
            input_dim,
            hidden,
            out_dim,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    fn update(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        li: usize,
        state: TensorId,
        message: TensorId,
    ) -> TensorId {
        match &self.layers[li] {
            LayerParams::Gcn {
                w_self,
                w_neigh,
                bias,
            } => {
                let ws = binding.bind(tape, &format!("gnn.layer{li}.w_self"), w_self);
                let wn = binding.bind(tape, &format!("gnn.layer{li}.w_neigh"), w_neigh);
                let b = binding.bind(tape, &format!("gnn.layer{li}.bias"), bias);
                let zs = tape.matmul(state, ws);
                let zn = tape.matmul(message, wn);
                let z = tape.add(zs, zn);
                let z = tape.add_rows(z, b);
                tape.relu(z)
            }
            LayerParams::Gin { w1, b1, w2, b2 } => {
                let w1 = binding.bind(tape, &format!("gnn.layer{li}.w1"), w1);
                let b1 = binding.bind(tape, &format!("gnn.layer{li}.b1"), b1);
                let w2 = binding.bind(tape, &format!("gnn.layer{li}.w2"), w2);
                let b2 = binding.bind(tape, &format!("gnn.layer{li}.b2"), b2);
                let z = tape.add(state, message);
                let z1 = tape.matmul(z, w1);
                let z1 = tape.add_rows(z1, b1);
                let a1 = tape.relu(z1);
                let z2 = tape.matmul(a1, w2);
                tape.add_rows(z2, b2)
            }
        }
    }

    fn aggregate(
        &self,
        tape: &mut Tape,
        graph: &Rc<WeightedGraph>,
        state: TensorId,
        weights: TensorId,
        degree: Option<TensorId>,
    ) -> TensorId {
        let summed = tape.graph_neighbor_sum(graph, state, weights);
        match self.aggregator {
            Aggregator::GcnMean => {
                let deg = degree.expect("degree precomputed for mean aggregation");
                tape.div_rows(summed, deg)
            }
            Aggregator::GinSum => summed,
        }
    }

    /// Adaptive forward pass: vertex `x` freezes after layer `depths[x]`;
    /// frozen vertices keep sending their frozen state. Returns the final
    /// per-vertex states `[n, hidden]`.
    pub fn forward_adaptive(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        graph: &Rc<WeightedGraph>,
        features_id: TensorId,
        weights_id: TensorId,
        depths: &[usize],
    ) -> Result<TensorId, GnnError> {
        let l_max = depths.iter().copied().max().unwrap_or(0);
        if l_max > self.layers.len() {
            return Err(GnnError::DepthExceedsLayers {
                depth: l_max,
                layers: self.layers.len(),
            });
        }
        if l_max == 0 {
            return Err(GnnError::BadConfig("all stopping depths are zero".into()));
        }
        let degree = matches!(self.aggregator, Aggregator::GcnMean)
            .then(|| tape.weighted_degree(graph, weights_id));
        let mut state = features_id;
        for t in 1..=l_max {
            let message = self.aggregate(tape, graph, state, weights_id, degree);
            let updated = self.update(tape, binding, t - 1, state, message);
            state = if t == 1 {
                // every vertex has depth ≥ 1
                updated
            } else {
                let mask = Rc::new(depths.iter().map(|&d| t <= d).collect::<Vec<bool>>());
                tape.select_rows(mask, updated, state)
            };
        }
        Ok(state)
    }

    /// Standard fixed-depth forward through all layers (no freezing).
    pub fn forward_standard(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        graph: &Rc<WeightedGraph>,
        features_id: TensorId,
        weights_id: TensorId,
    ) -> Result<TensorId, GnnError> {
        let uniform = vec![self.layers.len(); graph.n_vertices()];
        self.forward_adaptive(tape, binding, graph, features_id, weights_id, &uniform)
    }

    /// Task head over final states: node tasks map every row, graph tasks
    /// first pool rows by mean. Returns logits `[n, out]` or `[1, out]`.
    pub fn head(
        &self,
        tape: &mut Tape,
        binding: &mut TapeBinding,
        states: TensorId,
        graph_level: bool,
    ) -> TensorId {
        let input = if graph_level {
            tape.mean_rows(states)
        } else {
            states
        };
        let w = binding.bind(tape, "gnn.head.weight", &self.head_w);
        let b = binding.bind(tape, "gnn.head.bias", &self.head_b);
        let z = tape.matmul(input, w);
        tape.add_rows(z, b)
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(String, &Tensor)) {
        for (li, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerParams::Gcn {
                    w_self,
                    w_neigh,
                    bias,
                } => {
                    f(format!("gnn.layer{li}.w_self"), w_self);
                    f(format!("gnn.layer{li}.w_neigh"), w_neigh);
                    f(format!("gnn.layer{li}.bias"), bias);
                }
                LayerParams::Gin { w1, b1, w2, b2 } => {
                    f(format!("gnn.layer{li}.w1"), w1);
                    f(format!("gnn.layer{li}.b1"), b1);
                    f(format!("gnn.layer{li}.w2"), w2);
                    f(format!("gnn.layer{li}.b2"), b2);
                }
            }
        }
        f("gnn.head.weight".to_string(), &self.head_w);
        f("gnn.head.bias".to_string(), &self.head_b);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor)) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                LayerParams::Gcn {
                    w_self,
                    w_neigh,
                    bias,
                } => {
                    f(format!("gnn.layer{li}.w_self"), w_self);
                    f(format!("gnn.layer{li}.w_neigh"), w_neigh);
                    f(format!("gnn.layer{li}.bias"), bias);
                }
                LayerParams::Gin { w1, b1, w2, b2 } => {
                    f(format!("gnn.layer{li}.w1"), w1);
                    f(format!("gnn.layer{li}.b1"), b1);
                    f(format!("gnn.layer{li}.w2"), w2);
                    f(format!("gnn.layer{li}.b2"), b2);
                }
            }
        }
        f("gnn.head.weight".to_string(), &mut self.head_w);
        f("gnn.head.bias".to_string(), &mut self.head_b);
    }
}

/// Builds the taped task loss: mean cross-entropy for classification, mean
/// squared error for regression, over the masked rows.
pub fn task_loss(
    tape: &mut Tape,
    outputs: TensorId,
    labels: &Labels,
    mask: &[bool],
) -> Result<TensorId, GnnError> {
    let n_rows = tape.value(outputs).shape()[0];
    match labels {
        Labels::NodeClass(y) => {
            if y.len() != n_rows {
                return Err(GnnError::LabelLength {
                    got: y.len(),
                    want: n_rows,
                });
            }
            let classes = tape.value(outputs).shape()[1];
            if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
                return Err(GnnError::LabelOutOfRange {
                    label: bad,
                    classes,
                });
            }
            Ok(tape.softmax_cross_entropy(outputs, Rc::new(y.clone()), Rc::new(mask.to_vec())))
        }
        Labels::NodeReg(y) => {
            if y.len() != n_rows {
                return Err(GnnError::LabelLength {
                    got: y.len(),
                    want: n_rows,
                });
            }
            let pred = tape.reshape(outputs, &[n_rows]);
            Ok(tape.mse_masked(pred, Rc::new(y.clone()), Rc::new(mask.to_vec())))
        }
        Labels::GraphClass(y) => {
            let classes = tape.value(outputs).shape()[1];
            if *y >= classes {
                return Err(GnnError::LabelOutOfRange { label: *y, classes });
            }
            Ok(tape.softmax_cross_entropy(outputs, Rc::new(vec![*y]), Rc::new(vec![true])))
        }
        Labels::GraphReg(y) => {
            let pred = tape.reshape(outputs, &[1]);
            Ok(tape.mse_masked(pred, Rc::new(vec![*y]), Rc::new(vec![true])))
        }
    }
}

/// Fraction of masked rows whose argmax matches the label (ties take the
/// lowest index). Returns 1.0 on an empty mask.
pub fn accuracy(logits: &[f64], classes: usize, labels: &[usize], mask: &[bool]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (x, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        total += 1;
        let row = &logits[x * classes..(x + 1) * classes];
        let mut best = 0usize;
        for j in 1..classes {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[x] {
            hit += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

pub fn mse(preds: &[f64], targets: &[f64], mask: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut total = 0usize;
    for (x, &m) in mask.iter().enumerate() {
        if m {
            let d = preds[x] - targets[x];
            sum += d * d;
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        sum / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub aggregator: Aggregator,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Rank threshold percent in (0, 100].
    pub k: f64,
    /// Family size N (0 disables the curvature machinery together with λ = 0).
    pub n_functions: usize,
    pub lambda: f64,
    /// Maximum message-passing depth L (the model's layer count).
    pub max_depth: usize,
    pub hidden: usize,
    /// Hidden width of family members.
    pub family_hidden: usize,
    /// Epochs between depth recomputations.
    pub depth_refresh: usize,
    pub schedule: ThresholdSchedule,
    /// Reporting-only heat-step scale Δt echoed into run manifests.
    pub dt_report: f64,
    pub weight_decay: f64,
    pub learn_weights: bool,
    pub train_family: bool,
    pub kappa_mode: KappaMode,
    pub gamma2_form: Gamma2Form,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::NodeClassification,
            aggregator: Aggregator::GcnMean,
            epochs: 100,
            lr: 0.002,
            seed: 0,
            k: 20.0,
            n_functions: 2,
            lambda: 1.0,
            max_depth: 4,
            hidden: 16,
            family_hidden: 16,
            depth_refresh: 1,
            schedule: ThresholdSchedule::Fixed,
            dt_report: 1.0,
            weight_decay: 0.0,
            learn_weights: true,
            train_family: true,
            kappa_mode: KappaMode::Transductive,
            gamma2_form: Gamma2Form::Operator,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        if !(self.k > 0.0 && self.k <= 100.0) {
            return Err(GnnError::BadThreshold(self.k));
        }
        if self.lambda < 0.0 {
            return Err(GnnError::BadConfig("lambda must be ≥ 0".into()));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(GnnError::BadConfig("lr must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(GnnError::BadConfig("epochs must be ≥ 1".into()));
        }
        if self.max_depth == 0 || self.hidden == 0 {
            return Err(GnnError::BadConfig(
                "max_depth and hidden must be ≥ 1".into(),
            ));
        }
        if self.depth_refresh == 0 {
            return Err(GnnError::BadConfig("depth_refresh must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub curv_loss: f64,
    /// Accuracy for classification, MSE for regression; evaluated on the eval
    /// split when it is non-empty, on the train split otherwise.
    pub metric: f64,
}

pub struct TrainResult {
    pub model: GnnModel,
    pub curvature: LearnedCurvatureParams,
    pub family: FunctionFamily,
    pub history: Vec<EpochRecord>,
    pub final_kappa: Vec<f64>,
    pub final_depths: DepthAssignment,
    pub realized_weights: Vec<f64>,
}

/// Joint training: total loss = task loss + curvature loss, one Adam step per
/// epoch over the model, the curvature parameters, and (optionally) the family
/// and log-edge-weights. Deterministic for a fixed seed.
pub fn train(
    g: &Rc<WeightedGraph>,
    features: &VertexFeatures,
    labels: &Labels,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainResult, GnnError> {
    cfg.validate()?;
    let n = g.n_vertices();
    if features.n_vertices() != n {
        return Err(GnnError::FeatureRows {
            got: features.n_vertices(),
            want: n,
        });
    }
    let out_dim = match labels {
        Labels::NodeClass(y) => {
            if y.len() != n {
                return Err(GnnError::LabelLength {
                    got: y.len(),
                    want: n,
                });
            }
            (y.iter().copied().max().unwrap_or(0) + 1).max(2)
        }
        Labels::NodeReg(y) => {
            if y.len() != n {
                return Err(GnnError::LabelLength {
                    got: y.len(),
                    want: n,
                });
            }
            1
        }
        Labels::GraphClass(y) => (y + 1).max(2),
        Labels::GraphReg(_) => 1,
    };

    let mut model = GnnModel::new(
        cfg.aggregator,
        features.dim(),
        cfg.hidden,
        cfg.max_depth,
        out_dim,
        cfg.seed,
    )?;

    let mut family =
        FunctionFamily::new(cfg.n_functions, features.dim(), cfg.family_hidden, cfg.seed)?;
    let mut curv_params = match cfg.kappa_mode {
        KappaMode::Transductive => LearnedCurvatureParams::transductive(n, cfg.lambda),
        KappaMode::Inductive => LearnedCurvatureParams::inductive(
            features.dim(),
            cfg.family_hidden,
            cfg.lambda,
            cfg.seed,
        )?,
    };
    if cfg.learn_weights {
        curv_params.enable_learnable_weights(g);
    }

    let thresholds = layer_thresholds(cfg.schedule, cfg.k, cfg.max_depth, cfg.seed);
    let mut opt = OptimizerState::new(AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    });

    let features_tensor = Tensor::matrix(n, features.dim(), features.data().to_vec());
    let train_mask = &splits.train;
    let eval_on_eval = splits.eval.iter().any(|&m| m);

    let mut depths = assign_depths_scheduled(&curv_params.kappa_values(features)?, &thresholds)?;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if epoch > 0 && epoch % cfg.depth_refresh == 0 {
            depths = assign_depths_scheduled(&curv_params.kappa_values(features)?, &thresholds)?;
        }

        let mut tape = Tape::new();
        let mut binding = TapeBinding::new();
        let features_id = tape.constant(features_tensor.clone());
        let weights_id = curv_params.bind_weights(&mut tape, &mut binding, g);

        let states = model.forward_adaptive(
            &mut tape,
            &mut binding,
            g,
            features_id,
            weights_id,
            &depths.depths,
        )?;
        let outputs = model.head(&mut tape, &mut binding, states, cfg.task.is_graph_level());
        let t_loss = task_loss(&mut tape, outputs, labels, train_mask)?;

        let curv_build = build_curvature_loss(
            &mut tape,
            &mut binding,
            g,
            &family,
            &curv_params,
            features_id,
            weights_id,
            cfg.gamma2_form,
        );
        let total = tape.add(t_loss, curv_build.loss);

        let task_loss_val = tape.value(t_loss).item();
        let curv_loss_val = tape.value(curv_build.loss).item();
        if !tape.value(total).item().is_finite() {
            return Err(GnnError::Divergence { epoch });
        }

        let metric = {
            let out_vals = tape.value(outputs).data().to_vec();
            let mask = if eval_on_eval {
                &splits.eval
            } else {
                &splits.train
            };
            match labels {
                Labels::NodeClass(y) => accuracy(&out_vals, model.out_dim, y, mask),
                Labels::NodeReg(y) => mse(&out_vals, y, mask),
                Labels::GraphClass(y) => accuracy(&out_vals, model.out_dim, &[*y], &[true]),
                Labels::GraphReg(y) => mse(&out_vals, &[*y], &[true]),
            }
        };
        history.push(EpochRecord {
            epoch,
            task_loss: task_loss_val,
            curv_loss: curv_loss_val,
            metric,
        });

        let grads = tape.backward(total).expect("scalar total loss");
        let by_name = binding.gather(&grads);
        let mut step_err: Option<NnError> = None;
        {
            let mut apply = |name: String, t: &mut Tensor| {
                if step_err.is_none() {
                    if let Err(e) = opt.step(&name, t, by_name.get(&name)) {
                        step_err = Some(e);
                    }
                }
            };
            model.visit_params_mut(&mut apply);
            curv_params.visit_params_mut(&mut apply);
            if cfg.train_family {
                family.visit_params_mut(&mut apply);
            }
        }
        if let Some(e) = step_err {
            return Err(e.into());
        }
    }

    let final_kappa = curv_params.kappa_values(features)?;
    let final_depths = assign_depths_scheduled(&final_kappa, &thresholds)?;
    let realized_weights = curv_params.realized_weights(g);
    Ok(TrainResult {
        model,
        curvature: curv_params,
        family,
        history,
        final_kappa,
        final_depths,
        realized_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_examples_from_definition() {
        // 10 values, k = 20: fractions p = 0.1, 0.2, ..., 1.0
        let kappa: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        let d = assign_depths(&kappa, 20.0, 100).unwrap();
        // p = 0.1 → t = 1; p = 0.5 → t = 3; p = 1.0 → t = 5
        assert_eq!(d.depths[0], 1);
        assert_eq!(d.depths[4], 3);
        assert_eq!(d.depths[9], 5);
    }

    #[test]
    fn k_100_gives_uniform_depth_one() {
        let kappa = [0.4, -1.0, 2.0, 0.0, f64::NEG_INFINITY];
        let d = assign_depths(&kappa, 100.0, 8).unwrap();
        assert!(d.depths.iter().all(|&t| t == 1));
    }

    #[test]
    fn ties_share_depth_and_monotone() {
        let kappa = [1.0, 1.0, 0.5, 2.0, 0.5];
        let d = assign_depths(&kappa, 30.0, 10).unwrap();
        assert_eq!(d.depths[0], d.depths[1]);
        assert_eq!(d.depths[2], d.depths[4]);
        // κ(3) ≥ κ(0) ≥ κ(2) ⇒ T(3) ≤ T(0) ≤ T(2)
        assert!(d.depths[3] <= d.depths[0]);
        assert!(d.depths[0] <= d.depths[2]);
    }

    #[test]
    fn neg_infinity_ranks_deepest() {
        let kappa = [1.0, f64::NEG_INFINITY, 2.0];
        let d = assign_depths(&kappa, 40.0, 10).unwrap();
        assert!(d.depths[1] >= d.depths[0]);
        assert!(d.depths[1] >= d.depths[2]);
    }

    #[test]
    fn cap_applies() {
        let kappa: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = assign_depths(&kappa, 5.0, 3).unwrap();
        assert!(d.depths.iter().all(|&t| t <= 3));
        assert_eq!(d.max_assigned(), 3);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(
            assign_depths(&[], 20.0, 4),
            Err(GnnError::EmptyGraph)
        ));
        assert!(matches!(
            assign_depths(&[1.0], 150.0, 4),
            Err(GnnError::BadThreshold(_))
        ));
        assert!(matches!(
            assign_depths(&[f64::NAN], 20.0, 4),
            Err(GnnError::KappaNaN(0))
        ));
    }

    #[test]
    fn fixed_schedule_matches_plain_assignment() {
        let kappa = [0.3, -0.2, 1.4, 0.9, 0.0, 0.6];
        let plain = assign_depths(&kappa, 25.0, 6).unwrap();
        let sched = assign_depths_scheduled(&kappa, &[25.0; 6]).unwrap();
        assert_eq!(plain.depths, sched.depths);
    }
}
