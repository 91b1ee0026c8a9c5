//! Synthetic graph and dataset generators for tests, benchmarks, and smoke
//! experiments: classic small graphs, connected Erdős–Rényi samples, circulants
//! with controlled degree, and two-block stochastic block models with features.

use rand::Rng;

use crate::graph::{VertexFeatures, WeightedGraph};

pub fn path_graph(n: usize) -> WeightedGraph {
    let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::from_edges(n, &edges).unwrap()
}

pub fn complete_graph(n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v, 1.0));
        }
    }
    WeightedGraph::from_edges(n, &edges).unwrap()
}

pub fn cycle_graph(n: usize) -> WeightedGraph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    edges.push((n - 1, 0, 1.0));
    WeightedGraph::from_edges(n, &edges).unwrap()
}

/// Star with `leaves` leaves; vertex 0 is the center.
pub fn star_graph(leaves: usize) -> WeightedGraph {
    let edges: Vec<_> = (1..=leaves).map(|l| (0, l, 1.0)).collect();
    WeightedGraph::from_edges(leaves + 1, &edges).unwrap()
}

/// Circulant graph on `n` vertices connecting offsets `1..=half_degree`;
/// every vertex has degree `2 * half_degree`.
pub fn circulant_graph(n: usize, half_degree: usize) -> WeightedGraph {
    assert!(
        half_degree >= 1 && 2 * half_degree < n,
        "invalid circulant parameters"
    );
    let mut edges = Vec::new();
    for u in 0..n {
        for k in 1..=half_degree {
            let v = (u + k) % n;
            edges.push((u.min(v), u.max(v), 1.0));
        }
    }
    edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    WeightedGraph::from_edges(n, &edges).unwrap()
}

/// Erdős–Rényi G(n, p) with unit weights, resampled until connected.
pub fn erdos_renyi_connected(n: usize, p: f64, rng: &mut impl Rng) -> WeightedGraph {
    loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v, 1.0));
                }
            }
        }
        let g = WeightedGraph::from_edges(n, &edges).unwrap();
        if is_connected(&g) {
            return g;
        }
    }
}

/// Connected Erdős–Rényi sample with weights uniform in `[w_lo, w_hi]`.
pub fn erdos_renyi_weighted(
    n: usize,
    p: f64,
    w_lo: f64,
    w_hi: f64,
    rng: &mut impl Rng,
) -> WeightedGraph {
    let base = erdos_renyi_connected(n, p, rng);
    let weights: Vec<f64> = base
        .weights()
        .iter()
        .map(|_| rng.gen_range(w_lo..=w_hi))
        .collect();
    base.with_weights(&weights).unwrap()
}

pub fn is_connected(g: &WeightedGraph) -> bool {
    let n = g.n_vertices();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for (y, _) in g.neighbor_iter(x) {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == n
}

/// Two-block stochastic block model with block labels and Gaussian features
/// whose means separate by block. Returns (graph, features, labels).
pub fn sbm_two_block(
    n: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    mean_shift: f64,
    rng: &mut impl Rng,
) -> (WeightedGraph, VertexFeatures, Vec<usize>) {
    let labels: Vec<usize> = (0..n).map(|x| if x < n / 2 { 0 } else { 1 }).collect();
    let g = loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let p = if labels[u] == labels[v] { p_in } else { p_out };
                if rng.gen::<f64>() < p {
                    edges.push((u, v, 1.0));
                }
            }
        }
        let g = WeightedGraph::from_edges(n, &edges).unwrap();
        if is_connected(&g) {
            break g;
        }
    };
    let mut data = vec![0.0; n * feature_dim];
    for x in 0..n {
        let mu = if labels[x] == 0 {
            -mean_shift
        } else {
            mean_shift
        };
        for j in 0..feature_dim {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            data[x * feature_dim + j] = mu + noise;
        }
    }
    let features = VertexFeatures::new(n, feature_dim, data).unwrap();
    (g, features, labels)
}
