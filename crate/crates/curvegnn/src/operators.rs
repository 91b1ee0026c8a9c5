//! Discrete curvature operators on weighted graphs: the weighted Laplacian,
//! the local variation form Γ (carré du champ), its bilinear extension, and
//! the iterated form Γ₂ that measures local convexity.
//!
//! Definitions, for a vertex function `f` and vertex `x`:
//!
//! ```text
//! Δf(x)      = Σ_{y ~ x} w(x,y) (f(y) − f(x))
//! Γ(f,h)(x)  = ½ Σ_{y ~ x} w(x,y) (f(y) − f(x)) (h(y) − h(x))
//! Γ₂(f,f)(x) = ½ Δ Γ(f,f)(x) − Γ(f, Δf)(x)
//! ```
//!
//! Γ₂ uses the operator form above by default. The expanded variant
//! ([`Gamma2Form::Expanded`]) drops the ½ from the cross term — i.e. computes
//! `½ΔΓ − 2·Γ(f, Δf)` — and is kept selectable for comparison runs.
//!
//! Everything exists twice: plain functions over `&[f64]` here, and taped
//! counterparts composed from the graph-aware tape ops, asserted pointwise
//! equal in the shared test suite.

use std::rc::Rc;

use thiserror::Error;

use crate::autodiff::{gamma_apply, laplacian_apply, Tape, TensorId};
use crate::graph::WeightedGraph;

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("function length {got} does not match vertex count {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite function value at vertex {vertex}")]
    NonFinite { vertex: usize },
    #[error("vertex {id} out of range (graph has {n} vertices)")]
    VertexOutOfRange { id: usize, n: usize },
}

/// Which cross-term convention Γ₂ uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gamma2Form {
    /// `½ΔΓ(f,f) − Γ(f, Δf)` with the bilinear Γ carrying its ½.
    #[default]
    Operator,
    /// `½ΔΓ(f,f) − 2·Γ(f, Δf)`: the cross term without the bilinear ½.
    Expanded,
}

impl Gamma2Form {
    fn cross_factor(self) -> f64 {
        match self {
            Gamma2Form::Operator => 1.0,
            Gamma2Form::Expanded => 2.0,
        }
    }
}

fn check(g: &WeightedGraph, f: &[f64]) -> Result<(), OpsError> {
    if f.len() != g.n_vertices() {
        return Err(OpsError::LengthMismatch {
            got: f.len(),
            want: g.n_vertices(),
        });
    }
    if let Some(vertex) = f.iter().position(|v| !v.is_finite()) {
        return Err(OpsError::NonFinite { vertex });
    }
    Ok(())
}

/// Weighted Laplacian `Δf` per vertex.
pub fn laplacian(g: &WeightedGraph, f: &[f64]) -> Result<Vec<f64>, OpsError> {
    check(g, f)?;
    Ok(laplacian_apply(g, f, g.weights()))
}

/// Squared local variation `Γ(f,f)` per vertex.
pub fn gamma(g: &WeightedGraph, f: &[f64]) -> Result<Vec<f64>, OpsError> {
    gamma_bilinear(g, f, f)
}

/// Bilinear local variation `Γ(f,h)` per vertex.
pub fn gamma_bilinear(g: &WeightedGraph, f: &[f64], h: &[f64]) -> Result<Vec<f64>, OpsError> {
    check(g, f)?;
    check(g, h)?;
    Ok(gamma_apply(g, f, h, g.weights()))
}

/// Iterated form `Γ₂(f,f)` per vertex, operator convention.
pub fn gamma2(g: &WeightedGraph, f: &[f64]) -> Result<Vec<f64>, OpsError> {
    gamma2_with_form(g, f, Gamma2Form::Operator)
}

pub fn gamma2_with_form(
    g: &WeightedGraph,
    f: &[f64],
    form: Gamma2Form,
) -> Result<Vec<f64>, OpsError> {
    check(g, f)?;
    let w = g.weights();
    let gam = gamma_apply(g, f, f, w);
    let lap_gam = laplacian_apply(g, &gam, w);
    let lap_f = laplacian_apply(g, f, w);
    let cross = gamma_apply(g, f, &lap_f, w);
    let c = form.cross_factor();
    Ok(lap_gam
        .iter()
        .zip(&cross)
        .map(|(lg, cr)| 0.5 * lg - c * cr)
        .collect())
}

/// Squared local gradient at a single vertex: `Γ(f,f)(x)`.
pub fn local_gradient_sq(g: &WeightedGraph, f: &[f64], x: usize) -> Result<f64, OpsError> {
    check(g, f)?;
    if x >= g.n_vertices() {
        return Err(OpsError::VertexOutOfRange {
            id: x,
            n: g.n_vertices(),
        });
    }
    let mut s = 0.0;
    for (y, w) in g.neighbor_iter(x) {
        let d = f[y] - f[x];
        s += w * d * d;
    }
    Ok(0.5 * s)
}

/// Taped Γ₂ composed from the tape's graph ops; gradients flow to the
/// function and to the per-edge weight vector.
pub fn gamma2_taped(
    tape: &mut Tape,
    graph: &Rc<WeightedGraph>,
    f: TensorId,
    w: TensorId,
    form: Gamma2Form,
) -> TensorId {
    let gam = tape.graph_gamma(graph, f, f, w);
    let lap_gam = tape.graph_laplacian(graph, gam, w);
    let half_lap_gam = tape.scale(lap_gam, 0.5);
    let lap_f = tape.graph_laplacian(graph, f, w);
    let cross = tape.graph_gamma(graph, f, lap_f, w);
    let cross = tape.scale(cross, form.cross_factor());
    tape.sub(half_lap_gam, cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::graph::WeightedGraph;
    use crate::rng::stream;
    use rand::Rng;

    fn k2() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn p3() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn laplacian_on_k2() {
        let d = laplacian(&k2(), &[0.0, 1.0]).unwrap();
        assert_eq!(d, vec![1.0, -1.0]);
    }

    #[test]
    fn laplacian_kills_constants() {
        let d = laplacian(&triangle(), &[3.5, 3.5, 3.5]).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_on_triangle() {
        let d = laplacian(&triangle(), &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(d[0], 3.0);
    }

    #[test]
    fn gamma_on_k2_and_p3_center() {
        assert_eq!(gamma(&k2(), &[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let g = gamma(&p3(), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(g[1], 0.5);
    }

    #[test]
    fn gamma_bilinear_cases() {
        let g = p3();
        let f = [0.3, -1.0, 2.0];
        let diag = gamma_bilinear(&g, &f, &f).unwrap();
        assert_eq!(diag, gamma(&g, &f).unwrap());
        let c = gamma_bilinear(&g, &f, &[7.0, 7.0, 7.0]).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        let k = gamma_bilinear(&k2(), &[0.0, 1.0], &[0.0, -2.0]).unwrap();
        assert_eq!(k[0], -1.0);
    }

    #[test]
    fn gamma2_hand_values() {
        let g2 = gamma2(&k2(), &[0.0, 1.0]).unwrap();
        assert!((g2[0] - 1.0).abs() < 1e-15);
        let c = gamma2(&triangle(), &[5.0, 5.0, 5.0]).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        // center of a path, f = (1, 0, 0): Γ₂(center) = ¾b² + ¾c² + bc at b=1, c=0
        let g2 = gamma2(&p3(), &[1.0, 0.0, 0.0]).unwrap();
        assert!((g2[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn expanded_form_differs_by_cross_term() {
        let g = p3();
        let f = [0.2, -0.7, 1.1];
        let op = gamma2_with_form(&g, &f, Gamma2Form::Operator).unwrap();
        let ex = gamma2_with_form(&g, &f, Gamma2Form::Expanded).unwrap();
        let lap_f = laplacian(&g, &f).unwrap();
        let cross = gamma_bilinear(&g, &f, &lap_f).unwrap();
        for x in 0..3 {
            assert!((op[x] - ex[x] - cross[x]).abs() < 1e-14);
        }
    }

    #[test]
    fn local_gradient_sq_matches_gamma() {
        let g = p3();
        let mut rng = stream(5, "ops", 0);
        for _ in 0..20 {
            let f: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let gam = gamma(&g, &f).unwrap();
            for x in 0..3 {
                assert!((local_gradient_sq(&g, &f, x).unwrap() - gam[x]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        assert!(matches!(
            laplacian(&k2(), &[1.0]),
            Err(OpsError::LengthMismatch { got: 1, want: 2 })
        ));
        assert!(matches!(
            gamma(&k2(), &[1.0, f64::NAN]),
            Err(OpsError::NonFinite { vertex: 1 })
        ));
    }

    #[test]
    fn taped_ops_match_plain_to_1e12() {
        let graphs = vec![k2(), p3(), triangle()];
        let mut rng = stream(6, "ops-taped", 0);
        for g in graphs {
            let n = g.n_vertices();
            let g = Rc::new(g);
            for _ in 0..10 {
                let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let plain_lap = laplacian(&g, &f).unwrap();
                let plain_gam = gamma(&g, &f).unwrap();
                let plain_g2 = gamma2(&g, &f).unwrap();

                let mut tape = Tape::new();
                let f_id = tape.leaf(Tensor::vector(f.clone()));
                let w_id = tape.constant(Tensor::vector(g.weights().to_vec()));
                let lap = tape.graph_laplacian(&g, f_id, w_id);
                let gam = tape.graph_gamma(&g, f_id, f_id, w_id);
                let g2 = gamma2_taped(&mut tape, &g, f_id, w_id, Gamma2Form::Operator);
                for x in 0..n {
                    assert!((tape.value(lap).data()[x] - plain_lap[x]).abs() < 1e-12);
                    assert!((tape.value(gam).data()[x] - plain_gam[x]).abs() < 1e-12);
                    assert!((tape.value(g2).data()[x] - plain_g2[x]).abs() < 1e-12);
                }
            }
        }
    }
}
