//! Independent Cascade and Linear Threshold diffusion simulators, plus exact
//! enumeration oracles for toy graphs. Monte Carlo activation frequencies over
//! a seed set become per-vertex regression targets.
//!
//! Runs use counter-based RNG streams derived from `(seed, run index)`, so
//! results are reproducible, order-independent integer sums, and safe to
//! compute in parallel.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::WeightedGraph;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("seed set is empty")]
    EmptySeeds,
    #[error("seed vertex {id} out of range (graph has {n} vertices)")]
    SeedOutOfRange { id: usize, n: usize },
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("activation probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("fraction {fraction} selects no seeds on {n} vertices")]
    FractionTooSmall { fraction: f64, n: usize },
    #[error("exact enumeration limited to {limit} {what}, got {got}")]
    EnumerationTooLarge {
        what: &'static str,
        limit: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionModel {
    IndependentCascade,
    LinearThreshold,
}

impl DiffusionModel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ic" => Some(Self::IndependentCascade),
            "lt" => Some(Self::LinearThreshold),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::IndependentCascade => "ic",
            Self::LinearThreshold => "lt",
        }
    }
}

/// Edge activation probabilities for the cascade model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IcProbability {
    /// The same probability on every directed attempt.
    Uniform(f64),
    /// Weighted cascade: an attempt on `v` succeeds with probability `1/deg(v)`.
    WeightedCascade,
}

/// Per-vertex activation probabilities from a diffusion process.
#[derive(Debug, Clone)]
pub struct InfluenceTarget {
    pub probabilities: Vec<f64>,
    pub model: DiffusionModel,
    pub seeds: Vec<usize>,
    pub runs: usize,
}

fn check_seeds(g: &WeightedGraph, seeds: &[usize]) -> Result<(), InfluenceError> {
    if seeds.is_empty() {
        return Err(InfluenceError::EmptySeeds);
    }
    for &s in seeds {
        if s >= g.n_vertices() {
            return Err(InfluenceError::SeedOutOfRange {
                id: s,
                n: g.n_vertices(),
            });
        }
    }
    Ok(())
}

fn ic_single_run(
    g: &WeightedGraph,
    seeds: &[usize],
    p_mode: IcProbability,
    rng: &mut impl Rng,
    active: &mut [bool],
    frontier: &mut Vec<usize>,
    next: &mut Vec<usize>,
) {
    active.fill(false);
    frontier.clear();
    for &s in seeds {
        active[s] = true;
        frontier.push(s);
    }
    while !frontier.is_empty() {
        next.clear();
        for &u in frontier.iter() {
            for (v, _) in g.neighbor_iter(u) {
                if active[v] {
                    continue;
                }
                let p = match p_mode {
                    IcProbability::Uniform(p) => p,
                    IcProbability::WeightedCascade => 1.0 / g.degree(v) as f64,
                };
                if rng.gen::<f64>() < p {
                    active[v] = true;
                    next.push(v);
                }
            }
        }
        std::mem::swap(frontier, next);
    }
}

/// Independent Cascade Monte Carlo: each newly activated vertex gets one
/// Bernoulli attempt per currently inactive neighbor.
pub fn simulate_ic(
    g: &WeightedGraph,
    seeds: &[usize],
    p_mode: IcProbability,
    runs: usize,
    seed: u64,
) -> Result<InfluenceTarget, InfluenceError> {
    check_seeds(g, seeds)?;
    if runs == 0 {
        return Err(InfluenceError::NoRuns);
    }
    if let IcProbability::Uniform(p) = p_mode {
        if !(0.0..=1.0).contains(&p) {
            return Err(InfluenceError::BadProbability(p));
        }
    }
    let n = g.n_vertices();
    let counts: Vec<u64> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = stream(seed, "ic-run", run as u64);
            let mut active = vec![false; n];
            let mut frontier = Vec::new();
            let mut next = Vec::new();
            ic_single_run(
                g,
                seeds,
                p_mode,
                &mut rng,
                &mut active,
                &mut frontier,
                &mut next,
            );
            active.iter().map(|&a| a as u64).collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0u64; n],
            |mut acc, row| {
                for (a, r) in acc.iter_mut().zip(row) {
                    *a += r;
                }
                acc
            },
        );
    let probabilities = counts.iter().map(|&c| c as f64 / runs as f64).collect();
    Ok(InfluenceTarget {
        probabilities,
        model: DiffusionModel::IndependentCascade,
        seeds: seeds.to_vec(),
        runs,
    })
}

fn lt_single_run(
    g: &WeightedGraph,
    seeds: &[usize],
    rng: &mut impl Rng,
    active: &mut [bool],
    thresholds: &mut [f64],
    incoming: &mut [f64],
) {
    for t in thresholds.iter_mut() {
        *t = rng.gen::<f64>();
    }
    active.fill(false);
    incoming.fill(0.0);
    let mut frontier: Vec<usize> = Vec::new();
    for &s in seeds {
        if !active[s] {
            active[s] = true;
            frontier.push(s);
        }
    }
    // Newly active vertices push their normalized weight onto neighbors;
    // a vertex activates once its accumulated mass reaches its threshold.
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for (v, w) in g.neighbor_iter(u) {
                if active[v] {
                    continue;
                }
                incoming[v] += w / g.weighted_degree(v);
                if incoming[v] >= thresholds[v] {
                    active[v] = true;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
}

/// Linear Threshold Monte Carlo: thresholds are uniform on `[0, 1]`, redrawn
/// per run; a vertex activates when the normalized weight of its active
/// neighbors reaches its threshold.
pub fn simulate_lt(
    g: &WeightedGraph,
    seeds: &[usize],
    runs: usize,
    seed: u64,
) -> Result<InfluenceTarget, InfluenceError> {
    check_seeds(g, seeds)?;
    if runs == 0 {
        return Err(InfluenceError::NoRuns);
    }
    let n = g.n_vertices();
    let counts: Vec<u64> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = stream(seed, "lt-run", run as u64);
            let mut active = vec![false; n];
            let mut thresholds = vec![0.0; n];
            let mut incoming = vec![0.0; n];
            lt_single_run(
                g,
                seeds,
                &mut rng,
                &mut active,
                &mut thresholds,
                &mut incoming,
            );
            active.iter().map(|&a| a as u64).collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0u64; n],
            |mut acc, row| {
                for (a, r) in acc.iter_mut().zip(row) {
                    *a += r;
                }
                acc
            },
        );
    let probabilities = counts.iter().map(|&c| c as f64 / runs as f64).collect();
    Ok(InfluenceTarget {
        probabilities,
        model: DiffusionModel::LinearThreshold,
        seeds: seeds.to_vec(),
        runs,
    })
}

/// Samples `round(fraction · |V|)` seed vertices uniformly without
/// replacement, then simulates the chosen model.
pub fn make_influence_dataset(
    g: &WeightedGraph,
    fraction: f64,
    model: DiffusionModel,
    ic_mode: IcProbability,
    runs: usize,
    seed: u64,
) -> Result<(Vec<usize>, InfluenceTarget), InfluenceError> {
    let n = g.n_vertices();
    let n_seeds = (fraction * n as f64).round() as usize;
    if n_seeds == 0 {
        return Err(InfluenceError::FractionTooSmall { fraction, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, "influence-seeds", 0);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut seeds: Vec<usize> = order.into_iter().take(n_seeds).collect();
    seeds.sort_unstable();
    let target = match model {
        DiffusionModel::IndependentCascade => simulate_ic(g, &seeds, ic_mode, runs, seed)?,
        DiffusionModel::LinearThreshold => simulate_lt(g, &seeds, runs, seed)?,
    };
    Ok((seeds, target))
}

/// Exact IC activation probabilities by enumerating the live-edge
/// configurations (each direction of each edge flips independently).
/// Only feasible for toy graphs: requires `2·|E| ≤ 24`.
pub fn exact_ic(
    g: &WeightedGraph,
    seeds: &[usize],
    p_mode: IcProbability,
) -> Result<Vec<f64>, InfluenceError> {
    check_seeds(g, seeds)?;
    let n = g.n_vertices();
    let m2 = 2 * g.n_edges();
    if m2 > 24 {
        return Err(InfluenceError::EnumerationTooLarge {
            what: "directed edges",
            limit: 24,
            got: m2,
        });
    }
    // directed edge list: index 2e is u→v, 2e+1 is v→u
    let mut probs = Vec::with_capacity(m2);
    for &(u, v) in g.edges() {
        let p_uv = match p_mode {
            IcProbability::Uniform(p) => p,
            IcProbability::WeightedCascade => 1.0 / g.degree(v) as f64,
        };
        let p_vu = match p_mode {
            IcProbability::Uniform(p) => p,
            IcProbability::WeightedCascade => 1.0 / g.degree(u) as f64,
        };
        probs.push(p_uv);
        probs.push(p_vu);
    }
    let mut expectation = vec![0.0; n];
    let mut reach = vec![false; n];
    for config in 0u32..(1u32 << m2) {
        let mut weight = 1.0;
        for (i, &p) in probs.iter().enumerate() {
            weight *= if config & (1 << i) != 0 { p } else { 1.0 - p };
        }
        if weight == 0.0 {
            continue;
        }
        reach.fill(false);
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            reach[s] = true;
        }
        while let Some(u) = stack.pop() {
            for (eid, &(a, b)) in g.edges().iter().enumerate() {
                let (fwd, bwd) = (2 * eid, 2 * eid + 1);
                if a == u && config & (1 << fwd) != 0 && !reach[b] {
                    reach[b] = true;
                    stack.push(b);
                }
                if b == u && config & (1 << bwd) != 0 && !reach[a] {
                    reach[a] = true;
                    stack.push(a);
                }
            }
        }
        for x in 0..n {
            if reach[x] {
                expectation[x] += weight;
            }
        }
    }
    for p in &mut expectation {
        *p = p.clamp(0.0, 1.0);
    }
    Ok(expectation)
}

/// Exact LT activation probabilities via the live-edge equivalence: each
/// vertex independently keeps at most one incoming edge, edge `u→v` with
/// probability `w(u,v)/Σ_z w(z,v)`. Requires `Π (deg(v)+1) ≤ 2_000_000`.
pub fn exact_lt(g: &WeightedGraph, seeds: &[usize]) -> Result<Vec<f64>, InfluenceError> {
    check_seeds(g, seeds)?;
    let n = g.n_vertices();
    let mut combos: usize = 1;
    for v in 0..n {
        combos = combos.saturating_mul(g.degree(v) + 1);
        if combos > 2_000_000 {
            return Err(InfluenceError::EnumerationTooLarge {
                what: "live-edge choices",
                limit: 2_000_000,
                got: combos,
            });
        }
    }
    let choices: Vec<Vec<(Option<usize>, f64)>> = (0..n)
        .map(|v| {
            let deg_w = g.weighted_degree(v);
            let mut opts: Vec<(Option<usize>, f64)> = vec![(None, 0.0)];
            let mut mass = 0.0;
            for (u, w) in g.neighbor_iter(v) {
                let p = w / deg_w.max(f64::MIN_POSITIVE);
                opts.push((Some(u), p));
                mass += p;
            }
            opts[0].1 = (1.0 - mass).max(0.0);
            opts
        })
        .collect();
    let mut expectation = vec![0.0; n];
    let mut pick = vec![0usize; n];
    loop {
        let mut weight = 1.0;
        for v in 0..n {
            weight *= choices[v][pick[v]].1;
        }
        if weight > 0.0 {
            // reachability through chosen in-edges
            let mut reach = vec![false; n];
            let mut stack: Vec<usize> = seeds.to_vec();
            for &s in seeds {
                reach[s] = true;
            }
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if !reach[v] && choices[v][pick[v]].0 == Some(u) {
                        reach[v] = true;
                        stack.push(v);
                    }
                }
            }
            for x in 0..n {
                if reach[x] {
                    expectation[x] += weight;
                }
            }
        }
        // odometer increment
        let mut v = 0;
        loop {
            if v == n {
                for p in &mut expectation {
                    *p = p.clamp(0.0, 1.0);
                }
                return Ok(expectation);
            }
            pick[v] += 1;
            if pick[v] < choices[v].len() {
                break;
            }
            pick[v] = 0;
            v += 1;
        }
    }
}
