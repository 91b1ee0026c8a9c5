//! Ground-truth per-vertex curvature.
//!
//! The curvature κ(x) is the largest constant with
//! `Γ₂(f,f)(x) ≥ κ(x)·Γ(f,f)(x)` for every vertex function `f`, i.e. the
//! tightest lower bound on the ratio of two local quadratic forms. Both forms
//! only see `f` on the 2-ball around `x` and both annihilate constants, so:
//!
//! 1. assemble the forms on the 2-ball basis by polarization,
//! 2. gauge-fix `f(x) = 0` to remove the constant null direction,
//! 3. eliminate the 2-sphere coordinates (where Γ is blind but Γ₂ is not)
//!    through a Schur complement,
//! 4. solve the reduced symmetric pencil on the neighbor block, whose Γ side
//!    is diagonal positive, by a congruence transform and Jacobi eigensolve.
//!
//! If the 2-sphere block of Γ₂ fails to be positive semidefinite on Γ-null
//! directions, the ratio is unbounded below and the vertex is flagged with
//! `f64::NEG_INFINITY`.
//!
//! [`sampled_curvature`] is the independent secondary oracle: it evaluates the
//! raw ratio on random Gaussian functions straight from the operator
//! definitions, never touching the pencil machinery, and can only sit above
//! the exact infimum.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::WeightedGraph;
use crate::linalg::{min_eigenvalue, sym_eigen};
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error("curvature undefined for isolated vertex {0}")]
    IsolatedVertex(usize),
    #[error("curvature undefined for isolated vertices {0:?}")]
    IsolatedVertices(Vec<usize>),
    #[error("vertex {id} out of range (graph has {n} vertices)")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("all {0} sample draws were Γ-degenerate at vertex {1}")]
    DegenerateSamples(usize, usize),
}

/// How a set of per-vertex curvature values was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Sampled { n_samples: usize },
    Learned,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Sampled { .. } => "sampled",
            Provenance::Learned => "learned",
        }
    }
}

/// Per-vertex curvature values with provenance. Values are finite except for
/// explicitly flagged vertices, which carry `f64::NEG_INFINITY`.
#[derive(Debug, Clone)]
pub struct CurvatureEstimate {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl CurvatureEstimate {
    pub fn min_finite(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// The two local quadratic forms at a vertex, in the 2-ball basis
/// (`basis[0]` is the vertex itself, then neighbors ascending, then the
/// 2-sphere ascending). `a` is the Γ₂ form, `b` the Γ form; both are
/// `dim × dim` row-major, symmetric, and annihilate the all-ones vector.
#[derive(Debug, Clone)]
pub struct LocalFormPair {
    pub vertex: usize,
    pub basis: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub dim: usize,
}

impl LocalFormPair {
    /// Rows/columns with the gauge coordinate (`basis[0]`) removed.
    pub fn gauge_reduced(&self) -> (Vec<f64>, Vec<f64>, usize) {
        let m = self.dim - 1;
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = self.a[(i + 1) * self.dim + (j + 1)];
                b[i * m + j] = self.b[(i + 1) * self.dim + (j + 1)];
            }
        }
        (a, b, m)
    }
}

/// Scratch evaluator for the operators restricted to one 2-ball. Function
/// values are coefficient vectors over the ball basis; everything outside the
/// ball is implicitly zero, which cannot affect the value at the center.
struct LocalBall<'g> {
    g: &'g WeightedGraph,
    x: usize,
    ball: Vec<usize>,
    /// ball position per vertex id, usize::MAX outside
    pos: Vec<usize>,
    lap: Vec<f64>,
    gam: Vec<f64>,
}

impl<'g> LocalBall<'g> {
    fn new(g: &'g WeightedGraph, x: usize) -> Result<Self, CurvatureError> {
        if x >= g.n_vertices() {
            return Err(CurvatureError::VertexOutOfRange {
                id: x,
                n: g.n_vertices(),
            });
        }
        if g.degree(x) == 0 {
            return Err(CurvatureError::IsolatedVertex(x));
        }
        let ball = g.two_ball(x).expect("vertex in range");
        let mut pos = vec![usize::MAX; g.n_vertices()];
        for (i, &v) in ball.iter().enumerate() {
            pos[v] = i;
        }
        let deg_x = g.degree(x);
        Ok(Self {
            g,
            x,
            ball,
            pos,
            lap: vec![0.0; deg_x + 1],
            gam: vec![0.0; deg_x + 1],
        })
    }

    fn dim(&self) -> usize {
        self.ball.len()
    }

    #[inline]
    fn value(&self, f: &[f64], vertex: usize) -> f64 {
        let p = self.pos[vertex];
        if p == usize::MAX {
            0.0
        } else {
            f[p]
        }
    }

    /// Γ₂(f,f)(x) and Γ(f,f)(x) for a function given on the ball basis.
    fn gamma2_and_gamma(&mut self, f: &[f64]) -> (f64, f64) {
        // Laplacian and Γ on the 1-ball; slot 0 is x, slot k is the k-th neighbor.
        let fx = f[0];
        for (k, (y, _)) in self.g.neighbor_iter(self.x).enumerate() {
            let fy = self.value(f, y);
            let mut lap = 0.0;
            let mut gam = 0.0;
            for (z, wz) in self.g.neighbor_iter(y) {
                let d = self.value(f, z) - fy;
                lap += wz * d;
                gam += wz * d * d;
            }
            self.lap[k + 1] = lap;
            self.gam[k + 1] = 0.5 * gam;
        }
        let mut lap_x = 0.0;
        let mut gam_x = 0.0;
        for (y, w) in self.g.neighbor_iter(self.x) {
            let d = self.value(f, y) - fx;
            lap_x += w * d;
            gam_x += w * d * d;
        }
        self.lap[0] = lap_x;
        self.gam[0] = 0.5 * gam_x;

        let mut lap_gam = 0.0;
        let mut cross = 0.0;
        for (k, (_, w)) in self.g.neighbor_iter(self.x).enumerate() {
            lap_gam += w * (self.gam[k + 1] - self.gam[0]);
            cross += w * (self.extract_diff(f, k)) * (self.lap[k + 1] - self.lap[0]);
        }
        let gamma2 = 0.5 * lap_gam - 0.5 * cross;
        (gamma2, self.gam[0])
    }

    #[inline]
    fn extract_diff(&self, f: &[f64], k: usize) -> f64 {
        // f(y_k) − f(x) where y_k is the k-th neighbor = ball slot k + 1.
        f[k + 1] - f[0]
    }
}

/// Assembles the Γ₂ and Γ quadratic forms at `x` on the 2-ball basis via
/// polarization: `A_ij = ½(Q(e_i + e_j) − Q(e_i) − Q(e_j))`.
pub fn build_local_forms(g: &WeightedGraph, x: usize) -> Result<LocalFormPair, CurvatureError> {
    let mut ball = LocalBall::new(g, x)?;
    let dim = ball.dim();
    let mut f = vec![0.0; dim];

    let mut q_a = vec![0.0; dim];
    let mut q_b = vec![0.0; dim];
    for i in 0..dim {
        f[i] = 1.0;
        let (g2, gm) = ball.gamma2_and_gamma(&f);
        q_a[i] = g2;
        q_b[i] = gm;
        f[i] = 0.0;
    }
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim * dim];
    for i in 0..dim {
        a[i * dim + i] = q_a[i];
        b[i * dim + i] = q_b[i];
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            f[i] = 1.0;
            f[j] = 1.0;
            let (g2, gm) = ball.gamma2_and_gamma(&f);
            f[i] = 0.0;
            f[j] = 0.0;
            let aij = 0.5 * (g2 - q_a[i] - q_a[j]);
            let bij = 0.5 * (gm - q_b[i] - q_b[j]);
            a[i * dim + j] = aij;
            a[j * dim + i] = aij;
            b[i * dim + j] = bij;
            b[j * dim + i] = bij;
        }
    }
    Ok(LocalFormPair {
        vertex: x,
        basis: ball.ball.clone(),
        a,
        b,
        dim,
    })
}

/// Exact curvature at one vertex; `f64::NEG_INFINITY` flags an unbounded
/// pencil. Errors on isolated vertices, where the ratio has no test functions.
pub fn exact_curvature(g: &WeightedGraph, x: usize) -> Result<f64, CurvatureError> {
    let forms = build_local_forms(g, x)?;
    Ok(solve_pencil(g, x, &forms))
}

fn solve_pencil(g: &WeightedGraph, x: usize, forms: &LocalFormPair) -> f64 {
    let (a, b, m) = forms.gauge_reduced();
    let n1 = g.degree(x);
    let n2 = m - n1;

    let scale = a.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;

    // Schur-eliminate the 2-sphere block.
    let s = if n2 == 0 {
        a.clone()
    } else {
        let mut a11 = vec![0.0; n1 * n1];
        let mut a12 = vec![0.0; n1 * n2];
        let mut a22 = vec![0.0; n2 * n2];
        for i in 0..n1 {
            for j in 0..n1 {
                a11[i * n1 + j] = a[i * m + j];
            }
            for j in 0..n2 {
                a12[i * n2 + j] = a[i * m + (n1 + j)];
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                a22[i * n2 + j] = a[(n1 + i) * m + (n1 + j)];
            }
        }
        let eig = sym_eigen(&a22, n2);
        // Directions where Γ vanishes but Γ₂ curves downward, or couples to a
        // flat direction, drive the ratio to −∞.
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam < -tol {
                return f64::NEG_INFINITY;
            }
            if lam <= tol {
                let mut coupling = 0.0f64;
                for i in 0..n1 {
                    let mut s = 0.0;
                    for j in 0..n2 {
                        s += a12[i * n2 + j] * eig.vectors[j * n2 + k];
                    }
                    coupling = coupling.max(s.abs());
                }
                if coupling > tol {
                    return f64::NEG_INFINITY;
                }
            }
        }
        // S = A11 − (A12 V) Λ⁺ (A12 V)ᵀ over the non-null directions.
        let mut proj = vec![0.0; n1 * n2]; // (A12 V)
        for i in 0..n1 {
            for k in 0..n2 {
                let mut sum = 0.0;
                for j in 0..n2 {
                    sum += a12[i * n2 + j] * eig.vectors[j * n2 + k];
                }
                proj[i * n2 + k] = sum;
            }
        }
        let mut s = a11;
        for k in 0..n2 {
            let lam = eig.values[k];
            if lam > tol {
                for i in 0..n1 {
                    for j in 0..n1 {
                        s[i * n1 + j] -= proj[i * n2 + k] * proj[j * n2 + k] / lam;
                    }
                }
            }
        }
        s
    };

    // Γ side of the reduced pencil is diagonal positive: B_yy = ½ w(x,y).
    let mut d_inv_sqrt = vec![0.0; n1];
    for i in 0..n1 {
        d_inv_sqrt[i] = 1.0 / b[i * m + i].sqrt();
    }
    let mut pencil = vec![0.0; n1 * n1];
    for i in 0..n1 {
        for j in 0..n1 {
            pencil[i * n1 + j] = d_inv_sqrt[i] * s[i * n1 + j] * d_inv_sqrt[j];
        }
    }
    min_eigenvalue(&pencil, n1)
}

/// Minimum ratio `Γ₂/Γ` at `x` over random Gaussian functions on the 2-ball
/// with `f(x) = 0`, skipping draws with `Γ < 1e−12`. Always ≥ the exact value.
pub fn sampled_curvature(
    g: &WeightedGraph,
    x: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64, CurvatureError> {
    let mut ball = LocalBall::new(g, x)?;
    let dim = ball.dim();
    let mut rng = stream(seed, "sampled-curvature", x as u64);
    let mut f = vec![0.0; dim];
    let mut best = f64::INFINITY;
    let mut kept = 0usize;
    for _ in 0..n_samples {
        for slot in f.iter_mut().skip(1) {
            *slot = rng.sample::<f64, _>(StandardNormal);
        }
        let (g2, gm) = ball.gamma2_and_gamma(&f);
        if gm < 1e-12 {
            continue;
        }
        kept += 1;
        let ratio = g2 / gm;
        if ratio < best {
            best = ratio;
        }
    }
    if kept == 0 {
        return Err(CurvatureError::DegenerateSamples(n_samples, x));
    }
    Ok(best)
}

/// Exact curvature for every vertex, in parallel; fails listing any isolated
/// vertices, whose curvature is undefined.
pub fn exact_curvature_all(g: &WeightedGraph) -> Result<CurvatureEstimate, CurvatureError> {
    let isolated: Vec<usize> = (0..g.n_vertices()).filter(|&x| g.degree(x) == 0).collect();
    if !isolated.is_empty() {
        return Err(CurvatureError::IsolatedVertices(isolated));
    }
    let values: Vec<f64> = (0..g.n_vertices())
        .into_par_iter()
        .map(|x| exact_curvature(g, x).expect("isolation pre-checked"))
        .collect();
    Ok(CurvatureEstimate {
        values,
        provenance: Provenance::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::linalg::matvec;
    use crate::synthetic;

    fn k2(w: f64) -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, w)]).unwrap()
    }

    fn p3() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn k2_local_forms_match_hand_values() {
        let forms = build_local_forms(&k2(1.0), 0).unwrap();
        assert_eq!(forms.basis, vec![0, 1]);
        let (a, b, m) = forms.gauge_reduced();
        assert_eq!(m, 1);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!((b[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p3_center_forms_match_hand_values() {
        let forms = build_local_forms(&p3(), 1).unwrap();
        let (a, b, m) = forms.gauge_reduced();
        assert_eq!(m, 2);
        let expect_a = [0.75, 0.5, 0.5, 0.75];
        let expect_b = [0.5, 0.0, 0.0, 0.5];
        for i in 0..4 {
            assert!((a[i] - expect_a[i]).abs() < 1e-12, "A[{i}] = {}", a[i]);
            assert!((b[i] - expect_b[i]).abs() < 1e-12, "B[{i}] = {}", b[i]);
        }
    }

    #[test]
    fn forms_annihilate_constants() {
        let g = synthetic::erdos_renyi_connected(9, 0.4, &mut crate::rng::stream(3, "g", 0));
        for x in 0..g.n_vertices() {
            let forms = build_local_forms(&g, x).unwrap();
            let ones = vec![1.0; forms.dim];
            for v in matvec(&forms.a, forms.dim, &ones) {
                assert!(v.abs() < 1e-10, "A·1 component {v}");
            }
            for v in matvec(&forms.b, forms.dim, &ones) {
                assert!(v.abs() < 1e-10, "B·1 component {v}");
            }
        }
    }

    #[test]
    fn k2_curvature_is_two_and_scales() {
        assert!((exact_curvature(&k2(1.0), 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((exact_curvature(&k2(1.0), 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((exact_curvature(&k2(0.5), 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((exact_curvature(&k2(3.0), 0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn p3_center_curvature_is_half() {
        assert!((exact_curvature(&p3(), 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p3_ends_symmetric() {
        let est = exact_curvature_all(&p3()).unwrap();
        assert!((est.values[0] - est.values[2]).abs() < 1e-12);
        assert!((est.values[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_k2_pair_all_two() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let est = exact_curvature_all(&g).unwrap();
        for v in est.values {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_is_an_error() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            exact_curvature(&g, 2),
            Err(CurvatureError::IsolatedVertex(2))
        ));
        assert!(matches!(
            exact_curvature_all(&g),
            Err(CurvatureError::IsolatedVertices(v)) if v == vec![2]
        ));
    }

    #[test]
    fn sampled_k2_is_exactly_two() {
        // one gauge coordinate: the ratio is constant in f
        let s = sampled_curvature(&k2(1.0), 0, 50, 7).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_p3_center_converges() {
        let s = sampled_curvature(&p3(), 1, 100_000, 11).unwrap();
        assert!(s >= 0.5 - 1e-9);
        assert!((s - 0.5).abs() < 1e-3, "sampled {s}");
    }

    #[test]
    fn sampled_dominates_exact_on_random_graphs() {
        for gseed in 0..6u64 {
            let g =
                synthetic::erdos_renyi_connected(8, 0.4, &mut crate::rng::stream(gseed, "dom", 0));
            for x in 0..g.n_vertices() {
                let exact = exact_curvature(&g, x).unwrap();
                for sseed in 0..3u64 {
                    let s = sampled_curvature(&g, x, 500, sseed).unwrap();
                    assert!(s >= exact - 1e-9, "vertex {x}: sampled {s} < exact {exact}");
                }
            }
        }
    }

    #[test]
    fn curvature_scales_with_weights() {
        let g = synthetic::erdos_renyi_connected(7, 0.5, &mut crate::rng::stream(5, "sc", 0));
        let scaled: Vec<f64> = g.weights().iter().map(|w| 2.5 * w).collect();
        let g2 = g.with_weights(&scaled).unwrap();
        for x in 0..g.n_vertices() {
            let k1 = exact_curvature(&g, x).unwrap();
            let k2 = exact_curvature(&g2, x).unwrap();
            assert!((k2 - 2.5 * k1).abs() < 1e-9 * k1.abs().max(1.0));
        }
    }

    #[test]
    fn relabeling_permutes_curvature() {
        let g = synthetic::erdos_renyi_connected(8, 0.45, &mut crate::rng::stream(9, "perm", 0));
        // reverse relabeling x -> n-1-x
        let n = g.n_vertices();
        let edges: Vec<(usize, usize, f64)> = g
            .edges()
            .iter()
            .zip(g.weights())
            .map(|(&(u, v), &w)| (n - 1 - u, n - 1 - v, w))
            .collect();
        let gp = WeightedGraph::from_edges(n, &edges).unwrap();
        let a = exact_curvature_all(&g).unwrap().values;
        let b = exact_curvature_all(&gp).unwrap().values;
        for x in 0..n {
            assert!((a[x] - b[n - 1 - x]).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_form_stays_above_kappa_times_gamma() {
        // A − κB is PSD on the gauge-fixed space: for random f with f(x) = 0,
        // fᵀAf − κ fᵀBf ≥ −1e−9, evaluated straight from the assembled forms.
        use crate::rng::stream;
        use rand::Rng;
        let g = synthetic::erdos_renyi_connected(9, 0.4, &mut stream(21, "psd", 0));
        let mut rng = stream(22, "psd-f", 0);
        for x in 0..g.n_vertices() {
            let kappa = exact_curvature(&g, x).unwrap();
            assert!(kappa.is_finite());
            let forms = build_local_forms(&g, x).unwrap();
            let (a, b, m) = forms.gauge_reduced();
            for _ in 0..200 {
                let f: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let quad = |mat: &[f64]| -> f64 {
                    let mut s = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            s += f[i] * mat[i * m + j] * f[j];
                        }
                    }
                    s
                };
                let residual = quad(&a) - kappa * quad(&b);
                assert!(residual >= -1e-9, "vertex {x}: residual {residual}");
            }
        }
    }
}
