//! Undirected weighted graphs with validated construction, edge-list file
//! ingestion, and the CSV feature/label formats shared by every other module.
//!
//! A [`WeightedGraph`] is immutable after construction: adjacency is stored in
//! CSR form with neighbor lists sorted ascending, and every adjacency entry
//! carries the id of its canonical undirected edge so that per-edge weight
//! vectors (including learnable replacements) stay aligned in both directions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop at vertex {vertex} (line {line})")]
    SelfLoop { vertex: u64, line: usize },
    #[error("duplicate edge {u}-{v} (line {line})")]
    DuplicateEdge { u: u64, v: u64, line: usize },
    #[error("edge {u}-{v} listed with conflicting weights {w1} and {w2} (line {line})")]
    ConflictingWeight {
        u: u64,
        v: u64,
        w1: f64,
        w2: f64,
        line: usize,
    },
    #[error("non-positive weight {w} on edge {u}-{v}")]
    NonPositiveWeight { u: u64, v: u64, w: f64 },
    #[error("vertex id {id} out of range (graph has {n} vertices)")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("vertex id {id} exceeds declared vertex count {n}")]
    EdgeEndpointOutOfRange { id: usize, n: usize },
    #[error("feature/label file {path}: {msg}")]
    Table { path: String, msg: String },
    #[error("weight vector has length {got}, graph has {want} edges")]
    WeightLength { got: usize, want: usize },
}

/// Immutable undirected weighted graph.
///
/// Invariants enforced at construction: strictly positive weights, no
/// self-loops, no duplicate edges, dense vertex ids in `[0, n)`, and exact
/// symmetry (each canonical edge appears in both adjacency rows with the same
/// weight because both rows reference the same edge slot).
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Canonical edge id for each adjacency entry.
    adj_edge: Vec<usize>,
    /// Canonical edge list, `u < v`, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    names: Option<Vec<String>>,
}

impl WeightedGraph {
    /// Builds a graph from an explicit vertex count and undirected edge list.
    /// Each edge must be listed once (either orientation).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut canonical: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, w) in edges {
            if a >= n {
                return Err(GraphError::EdgeEndpointOutOfRange { id: a, n });
            }
            if b >= n {
                return Err(GraphError::EdgeEndpointOutOfRange { id: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop {
                    vertex: a as u64,
                    line: 0,
                });
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight {
                    u: a as u64,
                    v: b as u64,
                    w,
                });
            }
            let key = (a.min(b), a.max(b));
            if let Some(&prev) = canonical.get(&key) {
                if prev != w {
                    return Err(GraphError::ConflictingWeight {
                        u: key.0 as u64,
                        v: key.1 as u64,
                        w1: prev,
                        w2: w,
                        line: 0,
                    });
                }
                return Err(GraphError::DuplicateEdge {
                    u: key.0 as u64,
                    v: key.1 as u64,
                    line: 0,
                });
            }
            canonical.insert(key, w);
        }
        Ok(Self::assemble(n, canonical, None))
    }

    fn assemble(
        n: usize,
        canonical: BTreeMap<(usize, usize), f64>,
        names: Option<Vec<String>>,
    ) -> Self {
        let edges: Vec<(usize, usize)> = canonical.keys().copied().collect();
        let weights: Vec<f64> = canonical.values().copied().collect();
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for x in 0..n {
            offsets[x + 1] = offsets[x] + degree[x];
        }
        let total = offsets[n];
        let mut neighbors = vec![0usize; total];
        let mut adj_edge = vec![0usize; total];
        let mut cursor = offsets.clone();
        // BTreeMap iteration is sorted by (u, v), so each row fills ascending.
        for (eid, &(u, v)) in edges.iter().enumerate() {
            neighbors[cursor[u]] = v;
            adj_edge[cursor[u]] = eid;
            cursor[u] += 1;
        }
        // Second pass for the reverse direction keeps each row's tail sorted too.
        for (eid, &(u, v)) in edges.iter().enumerate() {
            neighbors[cursor[v]] = u;
            adj_edge[cursor[v]] = eid;
            cursor[v] += 1;
        }
        let mut g = Self {
            n,
            offsets,
            neighbors,
            adj_edge,
            edges,
            weights,
            names,
        };
        g.sort_rows();
        g
    }

    fn sort_rows(&mut self) {
        for x in 0..self.n {
            let lo = self.offsets[x];
            let hi = self.offsets[x + 1];
            let mut row: Vec<(usize, usize)> = (lo..hi)
                .map(|i| (self.neighbors[i], self.adj_edge[i]))
                .collect();
            row.sort_unstable();
            for (k, (nb, eid)) in row.into_iter().enumerate() {
                self.neighbors[lo + k] = nb;
                self.adj_edge[lo + k] = eid;
            }
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list (`u < v`, lexicographic order).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_of_edge(&self, edge_id: usize) -> f64 {
        self.weights[edge_id]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Neighbors of `x` with weights, ascending by neighbor id.
    pub fn neighbors(&self, x: usize) -> Result<Vec<(usize, f64)>, GraphError> {
        if x >= self.n {
            return Err(GraphError::VertexOutOfRange { id: x, n: self.n });
        }
        Ok(self.neighbor_iter(x).collect())
    }

    /// Unchecked iterator version for hot loops; `x` must be in range.
    pub fn neighbor_iter(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.offsets[x];
        let hi = self.offsets[x + 1];
        (lo..hi).map(move |i| (self.neighbors[i], self.weights[self.adj_edge[i]]))
    }

    /// Adjacency entries of `x` as (neighbor, canonical edge id).
    pub fn neighbor_edge_iter(&self, x: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let lo = self.offsets[x];
        let hi = self.offsets[x + 1];
        (lo..hi).map(move |i| (self.neighbors[i], self.adj_edge[i]))
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn weighted_degree(&self, x: usize) -> f64 {
        self.neighbor_iter(x).map(|(_, w)| w).sum()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|x| self.degree(x)).max().unwrap_or(0)
    }

    /// The 2-ball around `x` in canonical order: `x` first, then `N(x)`
    /// ascending, then the 2-sphere ascending.
    pub fn two_ball(&self, x: usize) -> Result<Vec<usize>, GraphError> {
        if x >= self.n {
            return Err(GraphError::VertexOutOfRange { id: x, n: self.n });
        }
        let mut mark = vec![0u8; self.n]; // 0 outside, 1 = x, 2 = sphere1, 3 = sphere2
        mark[x] = 1;
        let mut sphere1 = Vec::new();
        for (y, _) in self.neighbor_iter(x) {
            mark[y] = 2;
            sphere1.push(y);
        }
        let mut sphere2 = Vec::new();
        for &y in &sphere1 {
            for (z, _) in self.neighbor_iter(y) {
                if mark[z] == 0 {
                    mark[z] = 3;
                    sphere2.push(z);
                }
            }
        }
        sphere2.sort_unstable();
        let mut ball = Vec::with_capacity(1 + sphere1.len() + sphere2.len());
        ball.push(x);
        ball.extend_from_slice(&sphere1); // already ascending (CSR rows sorted)
        ball.extend_from_slice(&sphere2);
        Ok(ball)
    }

    /// Same structure with a replacement weight vector (aligned with
    /// [`WeightedGraph::edges`]). Used to freeze learned weights for oracle
    /// cross-checks.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, GraphError> {
        if weights.len() != self.edges.len() {
            return Err(GraphError::WeightLength {
                got: weights.len(),
                want: self.edges.len(),
            });
        }
        for (eid, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                let (u, v) = self.edges[eid];
                return Err(GraphError::NonPositiveWeight {
                    u: u as u64,
                    v: v as u64,
                    w,
                });
            }
        }
        let mut g = self.clone();
        g.weights = weights.to_vec();
        Ok(g)
    }

    /// Serializes to the edge-list text format (one `u v w` line per edge).
    /// Weights use the shortest decimal form that round-trips exactly.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (eid, &(u, v)) in self.edges.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", u, v, self.weights[eid]);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path.as_ref(), self.to_edge_list()).map_err(|source| GraphError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Parses the whitespace-delimited edge-list format: `u v [w]` per line,
/// `#` starts a comment, missing weights default to 1.0. Vertex ids may be
/// arbitrary non-negative integers; they are compacted to `[0, n)` in sorted
/// order, and the original ids are kept as names when compaction relabels.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph, GraphError> {
    struct RawEdge {
        u: u64,
        v: u64,
        w: f64,
        line: usize,
    }
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut fields = line.split_whitespace();
        let (u, v) = match (fields.next(), fields.next()) {
            (None, _) => continue,
            (Some(u), Some(v)) => (u, v),
            (Some(_), None) => {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    msg: "expected `u v [w]`".into(),
                })
            }
        };
        let parse_id = |tok: &str| {
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                msg: format!("invalid vertex id `{tok}`"),
            })
        };
        let u = parse_id(u)?;
        let v = parse_id(v)?;
        let w = match fields.next() {
            None => 1.0,
            Some(tok) => tok.parse::<f64>().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                msg: format!("invalid weight `{tok}`"),
            })?,
        };
        if let Some(extra) = fields.next() {
            return Err(GraphError::Parse {
                line: lineno + 1,
                msg: format!("unexpected trailing field `{extra}`"),
            });
        }
        if u == v {
            return Err(GraphError::SelfLoop {
                vertex: u,
                line: lineno + 1,
            });
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(GraphError::NonPositiveWeight { u, v, w });
        }
        raw.push(RawEdge {
            u,
            v,
            w,
            line: lineno + 1,
        });
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|e| [e.u, e.v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut canonical: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for e in &raw {
        let a = index[&e.u];
        let b = index[&e.v];
        let key = (a.min(b), a.max(b));
        if let Some(&(prev, _)) = canonical.get(&key) {
            if prev != e.w {
                return Err(GraphError::ConflictingWeight {
                    u: e.u.min(e.v),
                    v: e.u.max(e.v),
                    w1: prev,
                    w2: e.w,
                    line: e.line,
                });
            }
            return Err(GraphError::DuplicateEdge {
                u: e.u.min(e.v),
                v: e.u.max(e.v),
                line: e.line,
            });
        }
        canonical.insert(key, (e.w, e.line));
    }
    let canonical: BTreeMap<(usize, usize), f64> =
        canonical.into_iter().map(|(k, (w, _))| (k, w)).collect();

    let relabeled = ids.iter().enumerate().any(|(i, &id)| id != i as u64);
    let names = relabeled.then(|| ids.iter().map(|id| id.to_string()).collect());
    Ok(WeightedGraph::assemble(ids.len(), canonical, names))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph, GraphError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| GraphError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    parse_edge_list(&text)
}

/// Dense per-vertex feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFeatures {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl VertexFeatures {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self, GraphError> {
        if data.len() != n * dim {
            return Err(GraphError::Table {
                path: "<memory>".into(),
                msg: format!(
                    "feature matrix has {} values, expected {}",
                    data.len(),
                    n * dim
                ),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(GraphError::Table {
                path: "<memory>".into(),
                msg: format!("non-finite feature value {bad}"),
            });
        }
        Ok(Self { n, dim, data })
    }

    /// One-hot identity features; handy default when a task has no features.
    pub fn one_hot(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            data[x * n + x] = 1.0;
        }
        Self { n, dim: n, data }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.dim..(x + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>), GraphError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => {
                return Err(GraphError::Table {
                    path: path.display().to_string(),
                    msg: "empty file (header row required)".into(),
                })
            }
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
        }
    };
    let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let ncols = header.len();
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != ncols {
            return Err(GraphError::Table {
                path: path.display().to_string(),
                msg: format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    ncols,
                    fields.len()
                ),
            });
        }
        rows.push((lineno + 1, fields));
    }
    Ok((header, rows))
}

/// Loads a feature CSV (header row, first column vertex id). Every vertex in
/// `[0, n)` must appear exactly once; row order in the file is free.
pub fn load_features(path: impl AsRef<Path>, n: usize) -> Result<VertexFeatures, GraphError> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let dim = header.len().saturating_sub(1);
    if dim == 0 {
        return Err(GraphError::Table {
            path: path.display().to_string(),
            msg: "need at least one feature column".into(),
        });
    }
    let mut data = vec![f64::NAN; n * dim];
    let mut seen = vec![false; n];
    for (lineno, fields) in rows {
        let id: usize = fields[0].parse().map_err(|_| GraphError::Table {
            path: path.display().to_string(),
            msg: format!("line {lineno}: invalid vertex id `{}`", fields[0]),
        })?;
        if id >= n {
            return Err(GraphError::Table {
                path: path.display().to_string(),
                msg: format!("line {lineno}: vertex id {id} out of range [0, {n})"),
            });
        }
        if seen[id] {
            return Err(GraphError::Table {
                path: path.display().to_string(),
                msg: format!("line {lineno}: duplicate row for vertex {id}"),
            });
        }
        seen[id] = true;
        for (j, tok) in fields[1..].iter().enumerate() {
            data[id * dim + j] = tok.parse().map_err(|_| GraphError::Table {
                path: path.display().to_string(),
                msg: format!("line {lineno}: invalid number `{tok}`"),
            })?;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(GraphError::Table {
            path: path.display().to_string(),
            msg: format!("vertex {missing} has no feature row"),
        });
    }
    VertexFeatures::new(n, dim, data)
}

/// Split tag carried by the optional third column of a label CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Per-vertex labels: raw value column plus optional split tags.
#[derive(Debug, Clone)]
pub struct LabelTable {
    pub values: Vec<f64>,
    pub splits: Option<Vec<SplitTag>>,
}

/// Loads a label CSV: header, `vertex,label[,split]`. Labels are read as
/// numbers; classification callers round-trip them through `usize`.
pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<LabelTable, GraphError> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    if header.len() < 2 || header.len() > 3 {
        return Err(GraphError::Table {
            path: path.display().to_string(),
            msg: format!(
                "expected 2 or 3 columns (vertex,label[,split]), found {}",
                header.len()
            ),
        });
    }
    let has_split = header.len() == 3;
    let mut values = vec![f64::NAN; n];
    let mut splits = has_split.then(|| vec![SplitTag::Train; n]);
    let mut seen = vec![false; n];
    for (lineno, fields) in rows {
        let id: usize = fields[0].parse().map_err(|_| GraphError::Table {
            path: path.display().to_string(),
            msg: format!("line {lineno}: invalid vertex id `{}`", fields[0]),
        })?;
        if id >= n || seen[id] {
            return Err(GraphError::Table {
                path: path.display().to_string(),
                msg: format!("line {lineno}: bad or duplicate vertex id {id}"),
            });
        }
        seen[id] = true;
        values[id] = fields[1].parse().map_err(|_| GraphError::Table {
            path: path.display().to_string(),
            msg: format!("line {lineno}: invalid label `{}`", fields[1]),
        })?;
        if let Some(splits) = splits.as_mut() {
            splits[id] = match fields[2].as_str() {
                "train" => SplitTag::Train,
                "val" => SplitTag::Val,
                "test" => SplitTag::Test,
                other => {
                    return Err(GraphError::Table {
                        path: path.display().to_string(),
                        msg: format!("line {lineno}: unknown split tag `{other}`"),
                    })
                }
            };
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(GraphError::Table {
            path: path.display().to_string(),
            msg: format!("vertex {missing} has no label row"),
        });
    }
    Ok(LabelTable { values, splits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_default_weight_path() {
        let g = parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.weights(), &[1.0, 1.0]);
        assert_eq!(g.neighbors(1).unwrap(), vec![(0, 1.0), (2, 1.0)]);
    }

    #[test]
    fn parses_explicit_weight() {
        let g = parse_edge_list("0 1 2.5").unwrap();
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.neighbors(0).unwrap(), vec![(1, 2.5)]);
    }

    #[test]
    fn rejects_self_loop() {
        assert!(matches!(
            parse_edge_list("0 0 1.0"),
            Err(GraphError::SelfLoop { vertex: 0, line: 1 })
        ));
    }

    #[test]
    fn rejects_duplicates_and_conflicts() {
        assert!(matches!(
            parse_edge_list("0 1 1.0\n1 0 1.0"),
            Err(GraphError::DuplicateEdge {
                u: 0,
                v: 1,
                line: 2
            })
        ));
        assert!(matches!(
            parse_edge_list("0 1 1.0\n1 0 2.0"),
            Err(GraphError::ConflictingWeight { line: 2, .. })
        ));
    }

    #[test]
    fn reports_parse_line() {
        let err = parse_edge_list("0 1\nbogus 2").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
    }

    #[test]
    fn compacts_sparse_ids_keeping_names() {
        let g = parse_edge_list("10 30\n30 20").unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.names().unwrap(), &["10", "20", "30"]);
        // 10 -> 0, 20 -> 1, 30 -> 2
        assert_eq!(g.neighbors(2).unwrap(), vec![(0, 1.0), (1, 1.0)]);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let g = parse_edge_list("# header\n0 1 2.0 # tail comment\n\n1 2").unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.neighbors(1).unwrap(), vec![(0, 2.0), (2, 1.0)]);
    }

    #[test]
    fn isolated_vertex_has_empty_neighbors() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(g.neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn neighbor_out_of_range_errors() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            g.neighbors(5),
            Err(GraphError::VertexOutOfRange { id: 5, n: 2 })
        ));
    }

    #[test]
    fn two_ball_on_path_endpoint() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.two_ball(0).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.two_ball(1).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn two_ball_on_k2_and_star_leaf() {
        let k2 = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(k2.two_ball(0).unwrap(), vec![0, 1]);
        // star: center 0, leaves 1..=3
        let star = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(star.two_ball(1).unwrap(), vec![1, 0, 2, 3]);
    }

    #[test]
    fn round_trip_preserves_weights_exactly() {
        let g =
            WeightedGraph::from_edges(4, &[(0, 1, 0.1 + 0.2), (1, 2, 1.0 / 3.0), (2, 3, 2.5e-7)])
                .unwrap();
        let text = g.to_edge_list();
        let g2 = parse_edge_list(&text).unwrap();
        assert_eq!(g.edges(), g2.edges());
        assert_eq!(g.weights(), g2.weights());
    }

    #[test]
    fn two_ball_size_bound() {
        let g = WeightedGraph::from_edges(
            5,
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 4, 1.0),
            ],
        )
        .unwrap();
        for x in 0..5 {
            let ball = g.two_ball(x).unwrap();
            assert!(ball.contains(&x));
            for (y, _) in g.neighbor_iter(x) {
                assert!(ball.contains(&y));
            }
            let bound =
                1 + g.degree(x) + g.neighbor_iter(x).map(|(y, _)| g.degree(y)).sum::<usize>();
            assert!(ball.len() <= bound);
        }
    }
}
