//! Discrete Bakry-Émery curvature on weighted graphs and depth-adaptive
//! graph neural networks built on top of it.
//!
//! The crate provides:
//!
//! - validated weighted graphs with edge-list/CSV ingestion ([`graph`]);
//! - the local operators Δ, Γ, Γ₂ in plain and taped form ([`operators`]);
//! - an exact per-vertex curvature oracle via a local eigenvalue pencil, plus
//!   a random-sampling secondary oracle ([`exact`]);
//! - a learnable curvature estimator driven by a family of smooth MLP vertex
//!   functions and a hinge penalty ([`learn`]);
//! - curvature-ranked per-vertex stopping depths and depth-adaptive message
//!   passing with joint training ([`gnn`]);
//! - heat-semigroup simulation, local mixing-time and feature-decay checks,
//!   and IC/LT influence simulators for regression targets ([`heat`],
//!   [`influence`]);
//! - a reverse-mode tape ([`autodiff`]), smooth MLPs and Adam ([`nn`]), and
//!   deterministic labeled RNG streams ([`rng`]).

pub mod autodiff;
pub mod checkpoint;
pub mod exact;
pub mod gnn;
pub mod graph;
pub mod heat;
pub mod influence;
pub mod learn;
pub mod linalg;
pub mod nn;
pub mod operators;
pub mod rng;
pub mod synthetic;

pub use autodiff::{AutodiffError, Gradients, Tape, Tensor, TensorId};
pub use exact::{
    exact_curvature, exact_curvature_all, sampled_curvature, CurvatureEstimate, Provenance,
};
pub use gnn::{assign_depths, DepthAssignment};
pub use graph::{load_graph, parse_edge_list, VertexFeatures, WeightedGraph};
