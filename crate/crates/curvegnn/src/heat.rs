//! Heat-semigroup simulation and the numerical checks it supports.
//!
//! The flow is `f_t = e^{−tL} f₀` with `L = D − W`, the positive-semidefinite
//! weighted Laplacian (so `L = −Δ` in the sign convention of
//! [`crate::operators::laplacian`], and the semigroup genuinely smooths).
//! Desk-scale graphs get the exact semigroup through a dense symmetric
//! eigendecomposition; an explicit Euler stepper covers larger graphs and the
//! layer-as-heat-step reading of feature evolution.
//!
//! On top of the flow:
//! - [`mixing_time`]: first grid time at which the squared local gradient at a
//!   vertex has decayed by ε for every probe function, reported next to the
//!   `log(1/ε)/κ(x)` bound;
//! - [`semigroup_gradient_check`]: verifies the global-rate decay
//!   `max_x Γ(f_t)(x) ≤ e^{−2 κ_min t} max_x Γ(f₀)(x)`;
//! - [`feature_decay`]: per-layer distinctiveness ratios
//!   `D(x, l) = Γ(f_l)(x) / Γ(f₀)(x)` against the `e^{−κ·l·Δt}` budget.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::graph::WeightedGraph;
use crate::operators::{gamma, local_gradient_sq, OpsError};
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum HeatError {
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error("graph has {n} vertices, above the dense eigensolver cap {cap}; use the Euler stepper (--euler --dt)")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("time grid must be non-negative and strictly increasing")]
    BadTimeGrid,
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("euler step size must be positive, got {0}")]
    BadStep(f64),
    #[error("vertex {id} out of range (graph has {n} vertices)")]
    VertexOutOfRange { id: usize, n: usize },
}

pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Evolved states and their squared local gradients on a time grid.
#[derive(Debug, Clone)]
pub struct HeatFlowResult {
    pub t_grid: Vec<f64>,
    /// `states[i]` is `f_t` at `t_grid[i]`.
    pub states: Vec<Vec<f64>>,
    /// `gamma[i][x]` is `Γ(f_t, f_t)(x)` at `t_grid[i]`.
    pub gamma: Vec<Vec<f64>>,
    pub f0: Vec<f64>,
}

fn check_grid(t_grid: &[f64]) -> Result<(), HeatError> {
    if t_grid.is_empty() {
        return Err(HeatError::BadTimeGrid);
    }
    if t_grid[0] < 0.0 || !t_grid[0].is_finite() {
        return Err(HeatError::BadTimeGrid);
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(HeatError::BadTimeGrid);
        }
    }
    Ok(())
}

/// Dense Laplacian `L = D − W` of the graph.
pub fn laplacian_matrix(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut l = DMatrix::zeros(n, n);
    for x in 0..n {
        let mut deg = 0.0;
        for (y, w) in g.neighbor_iter(x) {
            l[(x, y)] = -w;
            deg += w;
        }
        l[(x, x)] = deg;
    }
    l
}

/// Spectral factors of `L` reused across probes.
pub struct HeatEngine {
    eigenvalues: Vec<f64>,
    /// column k is eigenvector k
    eigenvectors: DMatrix<f64>,
}

impl HeatEngine {
    pub fn new(g: &WeightedGraph, dense_cap: usize) -> Result<Self, HeatError> {
        let n = g.n_vertices();
        if n > dense_cap {
            return Err(HeatError::DenseCapExceeded { n, cap: dense_cap });
        }
        let l = laplacian_matrix(g);
        let eig = l.symmetric_eigen();
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    /// `f_t = U e^{−tΛ} Uᵀ f₀`; `t = 0` returns `f₀` exactly.
    pub fn evolve(&self, f0: &[f64], t: f64) -> Vec<f64> {
        if t == 0.0 {
            return f0.to_vec();
        }
        let f = DVector::from_column_slice(f0);
        let mut coeffs = self.eigenvectors.transpose() * f;
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= (-t * self.eigenvalues[k]).exp();
        }
        (&self.eigenvectors * coeffs).iter().copied().collect()
    }

    /// Second-smallest eigenvalue (the spectral gap for connected graphs) and
    /// its eigenvector.
    pub fn spectral_gap(&self) -> (f64, Vec<f64>) {
        let mut order: Vec<usize> = (0..self.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            self.eigenvalues[a]
                .partial_cmp(&self.eigenvalues[b])
                .unwrap()
        });
        let k = order[1.min(order.len() - 1)];
        (
            self.eigenvalues[k],
            self.eigenvectors.column(k).iter().copied().collect(),
        )
    }
}

/// Exact heat flow on a time grid via dense eigendecomposition.
pub fn heat_flow(
    g: &WeightedGraph,
    f0: &[f64],
    t_grid: &[f64],
    dense_cap: usize,
) -> Result<HeatFlowResult, HeatError> {
    check_grid(t_grid)?;
    // validates length and finiteness of f0
    let _ = gamma(g, f0)?;
    let engine = HeatEngine::new(g, dense_cap)?;
    let mut states = Vec::with_capacity(t_grid.len());
    let mut gammas = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let ft = engine.evolve(f0, t);
        gammas.push(gamma(g, &ft).expect("validated inputs"));
        states.push(ft);
    }
    Ok(HeatFlowResult {
        t_grid: t_grid.to_vec(),
        states,
        gamma: gammas,
        f0: f0.to_vec(),
    })
}

/// Explicit Euler fallback: `f ← f + dt·Δf` for `steps` steps, recording every
/// state (grid `0, dt, …, steps·dt`).
pub fn heat_flow_euler(
    g: &WeightedGraph,
    f0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<HeatFlowResult, HeatError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(HeatError::BadStep(dt));
    }
    let mut f = f0.to_vec();
    let mut states = vec![f.clone()];
    let mut gammas = vec![gamma(g, &f)?];
    let mut t_grid = vec![0.0];
    for step in 1..=steps {
        let lap = crate::operators::laplacian(g, &f).expect("validated inputs");
        for (fi, l) in f.iter_mut().zip(&lap) {
            *fi += dt * l;
        }
        states.push(f.clone());
        gammas.push(gamma(g, &f).expect("validated inputs"));
        t_grid.push(step as f64 * dt);
    }
    Ok(HeatFlowResult {
        t_grid,
        states,
        gamma: gammas,
        f0: f0.to_vec(),
    })
}

/// Probe set for mixing-time measurements: `n_random` random unit-norm
/// functions plus the indicator difference across each edge at `x`.
pub fn default_probes(
    g: &WeightedGraph,
    x: usize,
    n_random: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, HeatError> {
    let n = g.n_vertices();
    if x >= n {
        return Err(HeatError::VertexOutOfRange { id: x, n });
    }
    let mut probes = Vec::with_capacity(n_random + g.degree(x));
    let mut rng = stream(seed, "mixing-probes", x as u64);
    for _ in 0..n_random {
        let mut f: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut f {
                *v /= norm;
            }
        }
        probes.push(f);
    }
    for (y, _) in g.neighbor_iter(x) {
        let mut f = vec![0.0; n];
        f[y] = 1.0;
        f[x] = -1.0;
        probes.push(f);
    }
    Ok(probes)
}

/// Empirical local mixing time against the curvature bound.
#[derive(Debug, Clone)]
pub struct MixingReport {
    pub vertex: usize,
    pub eps: f64,
    /// First grid time at which every informative probe has decayed by ε;
    /// `None` if the grid ends first.
    pub empirical: Option<f64>,
    /// `log(1/ε)/κ(x)`; `None` when κ(x) ≤ 0.
    pub bound: Option<f64>,
    /// Per-probe first crossing times (diagnostic; `None` = not reached).
    pub per_probe: Vec<Option<f64>>,
    /// Probes skipped because their initial local gradient at `x` vanished.
    pub skipped_probes: usize,
}

/// Measures `τ_x(ε)`: scans the grid for the first time where
/// `Γ(f_t)(x) ≤ ε·Γ(f₀)(x)` holds for all probes with a non-degenerate
/// initial gradient at `x` (`Γ(f₀)(x) ≥ 1e−12`).
pub fn mixing_time(
    g: &WeightedGraph,
    x: usize,
    eps: f64,
    kappa_x: f64,
    probes: &[Vec<f64>],
    t_grid: &[f64],
    dense_cap: usize,
) -> Result<MixingReport, HeatError> {
    // ε = 1 is allowed and degenerate: τ is the first grid point (0 on grids
    // starting at 0) and the bound is log(1) / κ = 0.
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HeatError::BadEpsilon(eps));
    }
    check_grid(t_grid)?;
    if x >= g.n_vertices() {
        return Err(HeatError::VertexOutOfRange {
            id: x,
            n: g.n_vertices(),
        });
    }
    let engine = HeatEngine::new(g, dense_cap)?;
    let mut skipped = 0usize;
    let mut per_probe: Vec<Option<f64>> = Vec::with_capacity(probes.len());
    let mut trajectories: Vec<(f64, Vec<f64>)> = Vec::new(); // (gamma0_x, gamma_t at x)
    for f0 in probes {
        let g0 = local_gradient_sq(g, f0, x)?;
        if g0 < 1e-12 {
            skipped += 1;
            per_probe.push(None);
            continue;
        }
        let series: Vec<f64> = t_grid
            .iter()
            .map(|&t| {
                let ft = engine.evolve(f0, t);
                local_gradient_sq(g, &ft, x).expect("validated inputs")
            })
            .collect();
        let crossing = t_grid
            .iter()
            .zip(&series)
            .find(|(_, &gt)| gt <= eps * g0)
            .map(|(&t, _)| t);
        per_probe.push(crossing);
        trajectories.push((g0, series));
    }
    let empirical = t_grid
        .iter()
        .enumerate()
        .find(|(i, _)| {
            trajectories
                .iter()
                .all(|(g0, series)| series[*i] <= eps * g0)
        })
        .map(|(_, &t)| t);
    let bound = (kappa_x > 0.0).then(|| (1.0 / eps).ln() / kappa_x);
    Ok(MixingReport {
        vertex: x,
        eps,
        empirical,
        bound,
        per_probe,
        skipped_probes: skipped,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SemigroupRow {
    pub t: f64,
    pub max_gamma: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SemigroupReport {
    pub rows: Vec<SemigroupRow>,
    pub all_pass: bool,
}

/// Checks the global exponential gradient decay
/// `max_x Γ(f_t)(x) ≤ e^{−2 κ_min t} · max_x Γ(f₀)(x) · (1 + tol)` on the grid.
pub fn semigroup_gradient_check(
    g: &WeightedGraph,
    kappa_min: f64,
    f0: &[f64],
    t_grid: &[f64],
    rel_tol: f64,
) -> Result<SemigroupReport, HeatError> {
    let flow = heat_flow(g, f0, t_grid, DEFAULT_DENSE_CAP)?;
    let gamma0 = gamma(g, f0)?;
    let max0 = gamma0.iter().cloned().fold(0.0f64, f64::max);
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut all_pass = true;
    for (i, &t) in flow.t_grid.iter().enumerate() {
        let max_gamma = flow.gamma[i].iter().cloned().fold(0.0f64, f64::max);
        let bound = (-2.0 * kappa_min * t).exp() * max0 * (1.0 + rel_tol);
        let pass = max_gamma <= bound + f64::EPSILON;
        all_pass &= pass;
        rows.push(SemigroupRow {
            t,
            max_gamma,
            bound,
            pass,
        });
    }
    Ok(SemigroupReport { rows, all_pass })
}

#[derive(Debug, Clone, Copy)]
pub struct DecayPoint {
    pub layer: usize,
    /// `D(x, l)`; `None` when the initial gradient at `x` is degenerate.
    pub ratio: Option<f64>,
    /// `e^{−κ·l·Δt}`.
    pub bound: f64,
}

/// Feature distinctiveness per layer at one vertex, for a state sequence
/// `states[l]` produced by `l` heat steps of size `dt` (Euler or exact).
pub fn feature_decay(
    g: &WeightedGraph,
    states: &[Vec<f64>],
    x: usize,
    kappa_x: f64,
    dt: f64,
) -> Result<Vec<DecayPoint>, HeatError> {
    if x >= g.n_vertices() {
        return Err(HeatError::VertexOutOfRange {
            id: x,
            n: g.n_vertices(),
        });
    }
    if !(dt > 0.0) {
        return Err(HeatError::BadStep(dt));
    }
    let mut out = Vec::with_capacity(states.len());
    let gamma0 = match states.first() {
        Some(f0) => local_gradient_sq(g, f0, x)?,
        None => return Ok(out),
    };
    let degenerate = gamma0 < 1e-12;
    for (l, f_l) in states.iter().enumerate() {
        let bound = (-kappa_x * l as f64 * dt).exp();
        let ratio = if degenerate {
            None
        } else {
            Some(local_gradient_sq(g, f_l, x)? / gamma0)
        };
        out.push(DecayPoint {
            layer: l,
            ratio,
            bound,
        });
    }
    Ok(out)
}

/// Layer budget from the decay bound: largest `l` with `e^{−κ l Δt} ≥ ε`.
pub fn layer_budget(eps: f64, kappa: f64, dt: f64) -> Option<usize> {
    if !(eps > 0.0 && eps < 1.0) || kappa <= 0.0 || dt <= 0.0 {
        return None;
    }
    Some(((1.0 / eps).ln() / (kappa * dt)).floor() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    fn k2() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn time_zero_returns_f0_exactly() {
        let g = k2();
        let f0 = [0.25, -1.5];
        let flow = heat_flow(&g, &f0, &[0.0, 1.0], DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(flow.states[0], f0.to_vec());
    }

    #[test]
    fn constant_function_is_stationary() {
        let g = k2();
        let flow = heat_flow(&g, &[3.0, 3.0], &[0.0, 0.7, 2.0], DEFAULT_DENSE_CAP).unwrap();
        for state in &flow.states {
            for &v in state {
                assert!((v - 3.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn k2_flow_matches_closed_form() {
        // f0 = (0, 1): f_t = (½ − ½e^{−2t}, ½ + ½e^{−2t})
        let g = k2();
        let ts = [0.0, 0.1, 0.5, 1.3];
        let flow = heat_flow(&g, &[0.0, 1.0], &ts, DEFAULT_DENSE_CAP).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            let e = (-2.0 * t).exp();
            assert!((flow.states[i][0] - (0.5 - 0.5 * e)).abs() < 1e-10);
            assert!((flow.states[i][1] - (0.5 + 0.5 * e)).abs() < 1e-10);
        }
    }

    #[test]
    fn semigroup_property_composes() {
        let g = crate::synthetic::erdos_renyi_connected(8, 0.4, &mut stream(2, "heat", 0));
        let mut rng = stream(3, "heat-f0", 0);
        let f0: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let one = heat_flow(&g, &f0, &[0.7], DEFAULT_DENSE_CAP).unwrap();
        let two = heat_flow(&g, &one.states[0], &[0.4], DEFAULT_DENSE_CAP).unwrap();
        let direct = heat_flow(&g, &f0, &[1.1], DEFAULT_DENSE_CAP).unwrap();
        for (a, b) in two.states[0].iter().zip(&direct.states[0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let g = crate::synthetic::erdos_renyi_connected(9, 0.35, &mut stream(5, "heat", 1));
        let mut rng = stream(6, "heat-f0", 1);
        let f0: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let total0: f64 = f0.iter().sum();
        let flow = heat_flow(&g, &f0, &[0.5, 1.0, 4.0], DEFAULT_DENSE_CAP).unwrap();
        for state in &flow.states {
            assert!((state.iter().sum::<f64>() - total0).abs() < 1e-10);
        }
    }

    #[test]
    fn k2_mixing_time_closed_form() {
        let g = k2();
        let t_grid: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.001).collect();
        let probes = default_probes(&g, 0, 8, 1).unwrap();
        let report = mixing_time(&g, 0, 0.01, 2.0, &probes, &t_grid, DEFAULT_DENSE_CAP).unwrap();
        let tau = report.empirical.unwrap();
        let expected = (100.0f64).ln() / 4.0;
        assert!((tau - expected).abs() <= 0.0011, "tau {tau} vs {expected}");
        assert!(tau <= report.bound.unwrap());
        assert!((report.bound.unwrap() - 2.302585093).abs() < 1e-6);
    }

    #[test]
    fn eps_one_is_degenerate_zero() {
        let g = k2();
        let probes = default_probes(&g, 0, 2, 1).unwrap();
        let r = mixing_time(&g, 0, 1.0, 2.0, &probes, &[0.0, 1.0], DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(r.empirical, Some(0.0));
        assert_eq!(r.bound, Some(0.0));
        assert!(matches!(
            mixing_time(&g, 0, 1.5, 2.0, &probes, &[0.0, 1.0], DEFAULT_DENSE_CAP),
            Err(HeatError::BadEpsilon(_))
        ));
        // bound for κ = 2, ε = 0.01
        let r = mixing_time(&g, 0, 0.01, 2.0, &probes, &[0.0, 1.0], DEFAULT_DENSE_CAP).unwrap();
        assert!((r.bound.unwrap() - (100.0f64).ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_kappa_reports_no_bound() {
        let g = k2();
        let probes = default_probes(&g, 0, 2, 1).unwrap();
        let r = mixing_time(
            &g,
            0,
            0.5,
            -1.0,
            &probes,
            &[0.0, 0.5, 1.0],
            DEFAULT_DENSE_CAP,
        )
        .unwrap();
        assert!(r.bound.is_none());
        assert!(r.empirical.is_some());
    }

    #[test]
    fn k2_semigroup_check_is_tight() {
        let g = k2();
        let t_grid = [0.0, 0.2, 0.5, 1.0, 2.0];
        let report = semigroup_gradient_check(&g, 2.0, &[0.0, 1.0], &t_grid, 1e-6).unwrap();
        assert!(report.all_pass);
        // equality case: max Γ decays exactly as e^{−4t}
        for row in &report.rows {
            assert!(row.max_gamma <= row.bound);
            assert!(row.max_gamma >= row.bound / (1.0 + 1e-5) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn constant_passes_semigroup_check() {
        let g = k2();
        let report = semigroup_gradient_check(&g, 2.0, &[1.0, 1.0], &[0.0, 1.0], 1e-6).unwrap();
        assert!(report.all_pass);
    }

    #[test]
    fn feature_decay_layer_zero_is_one() {
        let g = k2();
        let flow = heat_flow_euler(&g, &[0.0, 1.0], 0.05, 3).unwrap();
        let decay = feature_decay(&g, &flow.states, 0, 2.0, 0.05).unwrap();
        assert_eq!(decay[0].layer, 0);
        assert!((decay[0].ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!((decay[0].bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_bound_formula() {
        let g = k2();
        let flow = heat_flow_euler(&g, &[0.0, 1.0], 1.0, 3).unwrap();
        let decay = feature_decay(&g, &flow.states, 0, 1.0, 1.0).unwrap();
        assert!((decay[3].bound - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn layer_budget_matches_formula() {
        // ε = 0.1, κ = 2, Δt = 0.5 → l ≤ ln(10) ≈ 2.30 → 2 layers
        assert_eq!(layer_budget(0.1, 2.0, 0.5), Some(2));
        assert_eq!(layer_budget(0.1, 0.0, 0.5), None);
    }

    #[test]
    fn euler_stability_on_k2() {
        // dt λ_max = 0.1 · 2 well under the stability limit
        let g = k2();
        let flow = heat_flow_euler(&g, &[0.0, 1.0], 0.1, 50).unwrap();
        let g_last = flow.gamma.last().unwrap();
        assert!(g_last.iter().all(|&v| v < 1e-3));
    }

    #[test]
    fn max_gamma_never_increases_on_samples() {
        for seed in 0..8u64 {
            let g = crate::synthetic::erdos_renyi_weighted(
                10,
                0.35,
                0.5,
                2.0,
                &mut stream(seed, "mono", 0),
            );
            let mut rng = stream(seed, "mono-f0", 0);
            let f0: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grid: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
            let flow = heat_flow(&g, &f0, &grid, DEFAULT_DENSE_CAP).unwrap();
            let maxes: Vec<f64> = flow
                .gamma
                .iter()
                .map(|row| row.iter().cloned().fold(0.0f64, f64::max))
                .collect();
            for w in maxes.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-9),
                    "max Γ increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }
}
