//! Dense tensors and a define-by-run reverse-mode gradient tape.
//!
//! The tape is rebuilt every optimization step: adaptive depth makes the
//! compute graph data-dependent, so nothing is cached across steps. All
//! arithmetic is `f64`; the Γ₂ assembly cancels near-equal sums and 32-bit
//! precision is not enough to keep the oracle and the learner in agreement.
//!
//! Graph-aware operations (weighted Laplacian, the bilinear local-variation
//! form, neighbor sums) are first-class tape nodes with hand-derived adjoints
//! so gradients flow to both the vertex function and the per-edge weights.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::graph::WeightedGraph;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("gradient requested for a detached (non-differentiable) node")]
    DetachedLeaf,
    #[error("gradient requested for unknown node {0}")]
    UnknownNode(usize),
}

/// Dense row-major tensor. Rank 0 (`shape == []`) is a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on non-scalar tensor");
        self.data[0]
    }

    fn rows(&self) -> usize {
        self.shape[0]
    }

    fn cols(&self) -> usize {
        self.shape[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

enum Op {
    Leaf {
        requires_grad: bool,
    },
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Neg(TensorId),
    Scale(TensorId, f64),
    MatMul(TensorId, TensorId),
    AddRows(TensorId, TensorId),
    DivRows(TensorId, TensorId),
    Sigmoid(TensorId),
    Relu(TensorId),
    Exp(TensorId),
    Sum(TensorId),
    Mean(TensorId),
    MeanRows(TensorId),
    Reshape(TensorId),
    SelectRows {
        mask: Rc<Vec<bool>>,
        on_true: TensorId,
        on_false: TensorId,
    },
    GraphLaplacian {
        graph: Rc<WeightedGraph>,
        f: TensorId,
        w: TensorId,
    },
    GraphGamma {
        graph: Rc<WeightedGraph>,
        f: TensorId,
        h: TensorId,
        w: TensorId,
    },
    GraphNeighborSum {
        graph: Rc<WeightedGraph>,
        x: TensorId,
        w: TensorId,
    },
    WeightedDegree {
        graph: Rc<WeightedGraph>,
        w: TensorId,
    },
    SoftmaxCrossEntropy {
        logits: TensorId,
        labels: Rc<Vec<usize>>,
        mask: Rc<Vec<bool>>,
    },
    MseMasked {
        pred: TensorId,
        target: Rc<Vec<f64>>,
        mask: Rc<Vec<bool>>,
    },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients gathered by [`Tape::backward`], keyed by leaf id.
pub struct Gradients {
    by_node: HashMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: TensorId) -> Result<&Tensor, AutodiffError> {
        self.by_node.get(&id.0).ok_or(AutodiffError::DetachedLeaf)
    }

    pub fn contains(&self, id: TensorId) -> bool {
        self.by_node.contains_key(&id.0)
    }
}

/// Reverse-mode tape. Build values through the op methods, then consume the
/// tape with [`Tape::backward`] to obtain gradients for every differentiable
/// leaf; dropping the tape clears the recorded graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> TensorId {
        self.nodes.push(Node { op, value });
        TensorId(self.nodes.len() - 1)
    }

    /// Differentiable leaf (a parameter).
    pub fn leaf(&mut self, value: Tensor) -> TensorId {
        self.push(
            Op::Leaf {
                requires_grad: true,
            },
            value,
        )
    }

    /// Non-differentiable leaf (data, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> TensorId {
        self.push(
            Op::Leaf {
                requires_grad: false,
            },
            value,
        )
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add: shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let shape = va.shape.clone();
        self.push(Op::Add(a, b), Tensor { shape, data })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "sub: shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect();
        let shape = va.shape.clone();
        self.push(Op::Sub(a, b), Tensor { shape, data })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul: shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let shape = va.shape.clone();
        self.push(Op::Mul(a, b), Tensor { shape, data })
    }

    pub fn neg(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        let t = Tensor {
            shape: va.shape.clone(),
            data: va.data.iter().map(|x| -x).collect(),
        };
        self.push(Op::Neg(a), t)
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let va = self.value(a);
        let t = Tensor {
            shape: va.shape.clone(),
            data: va.data.iter().map(|x| c * x).collect(),
        };
        self.push(Op::Scale(a, c), t)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape.len(), 2, "matmul: lhs must be a matrix");
        assert_eq!(vb.shape.len(), 2, "matmul: rhs must be a matrix");
        let (m, k) = (va.rows(), va.cols());
        let (k2, n) = (vb.rows(), vb.cols());
        assert_eq!(k, k2, "matmul: inner dimension mismatch");
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = va.data[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &vb.data[p * n..(p + 1) * n];
                let orow = &mut data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += aip * brow[j];
                }
            }
        }
        self.push(
            Op::MatMul(a, b),
            Tensor {
                shape: vec![m, n],
                data,
            },
        )
    }

    /// Matrix `[n, d]` plus a row vector `[d]` broadcast over rows.
    pub fn add_rows(&mut self, mat: TensorId, row: TensorId) -> TensorId {
        let (vm, vr) = (self.value(mat), self.value(row));
        assert_eq!(vm.shape.len(), 2, "add_rows: lhs must be a matrix");
        assert_eq!(vr.shape, vec![vm.cols()], "add_rows: row length mismatch");
        let d = vm.cols();
        let data = vm
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| x + vr.data[i % d])
            .collect();
        let shape = vm.shape.clone();
        self.push(Op::AddRows(mat, row), Tensor { shape, data })
    }

    /// Divides each row of `mat` (`[n, d]` or `[n]`) by the matching entry of
    /// `divisor` (`[n]`). Rows with a zero divisor map to zero.
    pub fn div_rows(&mut self, mat: TensorId, divisor: TensorId) -> TensorId {
        let (vm, vd) = (self.value(mat), self.value(divisor));
        let n = vm.shape[0];
        assert_eq!(vd.shape, vec![n], "div_rows: divisor length mismatch");
        let d = vm.numel() / n;
        let mut data = vec![0.0; vm.numel()];
        for x in 0..n {
            let div = vd.data[x];
            if div != 0.0 {
                for j in 0..d {
                    data[x * d + j] = vm.data[x * d + j] / div;
                }
            }
        }
        let shape = vm.shape.clone();
        self.push(Op::DivRows(mat, divisor), Tensor { shape, data })
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        let data = va.data.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect();
        let shape = va.shape.clone();
        self.push(Op::Sigmoid(a), Tensor { shape, data })
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        let data = va.data.iter().map(|&x| x.max(0.0)).collect();
        let shape = va.shape.clone();
        self.push(Op::Relu(a), Tensor { shape, data })
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        let data = va.data.iter().map(|&x| x.exp()).collect();
        let shape = va.shape.clone();
        self.push(Op::Exp(a), Tensor { shape, data })
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let s: f64 = self.value(a).data.iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        let s: f64 = va.data.iter().sum::<f64>() / va.numel() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// Column means of a `[n, d]` matrix, returned as a `[1, d]` matrix.
    pub fn mean_rows(&mut self, a: TensorId) -> TensorId {
        let va = self.value(a);
        assert_eq!(va.shape.len(), 2, "mean_rows: input must be a matrix");
        let (n, d) = (va.rows(), va.cols());
        let mut data = vec![0.0; d];
        for x in 0..n {
            for j in 0..d {
                data[j] += va.data[x * d + j];
            }
        }
        for v in &mut data {
            *v /= n as f64;
        }
        self.push(
            Op::MeanRows(a),
            Tensor {
                shape: vec![1, d],
                data,
            },
        )
    }

    /// Reinterprets the data with a new shape of equal element count.
    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> TensorId {
        let va = self.value(a);
        assert_eq!(
            va.numel(),
            shape.iter().product::<usize>(),
            "reshape: numel mismatch"
        );
        let t = Tensor {
            shape: shape.to_vec(),
            data: va.data.clone(),
        };
        self.push(Op::Reshape(a), t)
    }

    /// Row-wise select: rows where `mask` is true come from `on_true`,
    /// the rest from `on_false`. Shapes must match.
    pub fn select_rows(
        &mut self,
        mask: Rc<Vec<bool>>,
        on_true: TensorId,
        on_false: TensorId,
    ) -> TensorId {
        let (vt, vf) = (self.value(on_true), self.value(on_false));
        assert_eq!(vt.shape, vf.shape, "select_rows: shape mismatch");
        let n = vt.shape[0];
        assert_eq!(mask.len(), n, "select_rows: mask length mismatch");
        let d = vt.numel() / n;
        let mut data = vec![0.0; vt.numel()];
        for x in 0..n {
            let src = if mask[x] { &vt.data } else { &vf.data };
            data[x * d..(x + 1) * d].copy_from_slice(&src[x * d..(x + 1) * d]);
        }
        let shape = vt.shape.clone();
        self.push(
            Op::SelectRows {
                mask,
                on_true,
                on_false,
            },
            Tensor { shape, data },
        )
    }

    /// Weighted Laplacian of a vertex function: `out[x] = Σ_y w_xy (f[y] − f[x])`.
    /// `w` is the per-edge weight vector aligned with the graph's edge list.
    pub fn graph_laplacian(
        &mut self,
        graph: &Rc<WeightedGraph>,
        f: TensorId,
        w: TensorId,
    ) -> TensorId {
        let n = graph.n_vertices();
        let (vf, vw) = (self.value(f), self.value(w));
        assert_eq!(vf.numel(), n, "graph_laplacian: function length mismatch");
        assert_eq!(
            vw.numel(),
            graph.n_edges(),
            "graph_laplacian: weight length mismatch"
        );
        let value = Tensor::vector(laplacian_apply(graph, &vf.data, &vw.data));
        self.push(
            Op::GraphLaplacian {
                graph: Rc::clone(graph),
                f,
                w,
            },
            value,
        )
    }

    /// Bilinear local-variation form:
    /// `out[x] = ½ Σ_y w_xy (f[y] − f[x]) (h[y] − h[x])`.
    pub fn graph_gamma(
        &mut self,
        graph: &Rc<WeightedGraph>,
        f: TensorId,
        h: TensorId,
        w: TensorId,
    ) -> TensorId {
        let n = graph.n_vertices();
        let (vf, vh, vw) = (self.value(f), self.value(h), self.value(w));
        assert_eq!(vf.numel(), n, "graph_gamma: f length mismatch");
        assert_eq!(vh.numel(), n, "graph_gamma: h length mismatch");
        assert_eq!(
            vw.numel(),
            graph.n_edges(),
            "graph_gamma: weight length mismatch"
        );
        let value = Tensor::vector(gamma_apply(graph, &vf.data, &vh.data, &vw.data));
        self.push(
            Op::GraphGamma {
                graph: Rc::clone(graph),
                f,
                h,
                w,
            },
            value,
        )
    }

    /// Weighted neighbor sum: `out[x] = Σ_y w_xy · X[y]` for `[n]` or `[n, d]`.
    pub fn graph_neighbor_sum(
        &mut self,
        graph: &Rc<WeightedGraph>,
        x: TensorId,
        w: TensorId,
    ) -> TensorId {
        let n = graph.n_vertices();
        let vx = self.value(x);
        let vw = self.value(w);
        assert_eq!(vx.shape[0], n, "graph_neighbor_sum: row count mismatch");
        assert_eq!(
            vw.numel(),
            graph.n_edges(),
            "graph_neighbor_sum: weight length mismatch"
        );
        let d = vx.numel() / n;
        let value = Tensor {
            shape: vx.shape.clone(),
            data: neighbor_sum_apply(graph, &vx.data, d, &vw.data),
        };
        self.push(
            Op::GraphNeighborSum {
                graph: Rc::clone(graph),
                x,
                w,
            },
            value,
        )
    }

    /// Weighted degree vector: `out[x] = Σ_y w_xy`.
    pub fn weighted_degree(&mut self, graph: &Rc<WeightedGraph>, w: TensorId) -> TensorId {
        let vw = self.value(w);
        assert_eq!(
            vw.numel(),
            graph.n_edges(),
            "weighted_degree: weight length mismatch"
        );
        let n = graph.n_vertices();
        let mut data = vec![0.0; n];
        for x in 0..n {
            for (_, eid) in graph.neighbor_edge_iter(x) {
                data[x] += vw.data[eid];
            }
        }
        self.push(
            Op::WeightedDegree {
                graph: Rc::clone(graph),
                w,
            },
            Tensor::vector(data),
        )
    }

    /// Mean cross-entropy of row-wise softmax over the masked rows.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: TensorId,
        labels: Rc<Vec<usize>>,
        mask: Rc<Vec<bool>>,
    ) -> TensorId {
        let v = self.value(logits);
        assert_eq!(
            v.shape.len(),
            2,
            "softmax_cross_entropy: logits must be [n, c]"
        );
        let (n, c) = (v.rows(), v.cols());
        assert_eq!(
            labels.len(),
            n,
            "softmax_cross_entropy: label count mismatch"
        );
        assert_eq!(mask.len(), n, "softmax_cross_entropy: mask length mismatch");
        let count = mask.iter().filter(|&&m| m).count().max(1);
        let mut loss = 0.0;
        for x in 0..n {
            if !mask[x] {
                continue;
            }
            assert!(
                labels[x] < c,
                "label {} out of range for {} classes",
                labels[x],
                c
            );
            let row = &v.data[x * c..(x + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
            loss += lse - row[labels[x]];
        }
        loss /= count as f64;
        self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                mask,
            },
            Tensor::scalar(loss),
        )
    }

    /// Mean squared error over masked entries of a `[n]` (or `[n, 1]`) prediction.
    pub fn mse_masked(
        &mut self,
        pred: TensorId,
        target: Rc<Vec<f64>>,
        mask: Rc<Vec<bool>>,
    ) -> TensorId {
        let v = self.value(pred);
        let n = v.shape[0];
        assert_eq!(
            v.numel(),
            n,
            "mse_masked: prediction must have one value per row"
        );
        assert_eq!(target.len(), n, "mse_masked: target length mismatch");
        assert_eq!(mask.len(), n, "mse_masked: mask length mismatch");
        let count = mask.iter().filter(|&&m| m).count().max(1);
        let mut loss = 0.0;
        for x in 0..n {
            if mask[x] {
                let d = v.data[x] - target[x];
                loss += d * d;
            }
        }
        loss /= count as f64;
        self.push(Op::MseMasked { pred, target, mask }, Tensor::scalar(loss))
    }

    /// Consumes the tape, propagating gradients from the scalar `loss` back to
    /// every differentiable leaf (zero gradients included).
    pub fn backward(self, loss: TensorId) -> Result<Gradients, AutodiffError> {
        let loss_val = &self.nodes[loss.0].value;
        if !loss_val.is_scalar() {
            return Err(AutodiffError::NonScalarLoss(loss_val.shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = self.nodes.iter().map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..self.nodes.len()).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { .. } => {
                    grads[idx] = Some(gout);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += go;
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *b, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += go;
                        }
                    });
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += go;
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *b, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi -= go;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let va = self.nodes[a.0].value.data.clone();
                    let vb = self.nodes[b.0].value.data.clone();
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for i in 0..g.len() {
                            g[i] += gout[i] * vb[i];
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *b, |g| {
                        for i in 0..g.len() {
                            g[i] += gout[i] * va[i];
                        }
                    });
                }
                Op::Neg(a) => {
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi -= go;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += c * go;
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    let (m, k) = (va.rows(), va.cols());
                    let n = vb.cols();
                    let (va, vb) = (va.data.clone(), vb.data.clone());
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        // dA = dOut · Bᵀ
                        for i in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += gout[i * n + j] * vb[p * n + j];
                                }
                                g[i * k + p] += s;
                            }
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *b, |g| {
                        // dB = Aᵀ · dOut
                        for p in 0..k {
                            for j in 0..n {
                                let mut s = 0.0;
                                for i in 0..m {
                                    s += va[i * k + p] * gout[i * n + j];
                                }
                                g[p * n + j] += s;
                            }
                        }
                    });
                }
                Op::AddRows(mat, row) => {
                    let d = self.nodes[row.0].value.numel();
                    accumulate(&mut grads, &self.nodes, *mat, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += go;
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *row, |g| {
                        for (i, &go) in gout.iter().enumerate() {
                            g[i % d] += go;
                        }
                    });
                }
                Op::DivRows(mat, divisor) => {
                    let vm = &self.nodes[mat.0].value;
                    let n = vm.shape[0];
                    let d = vm.numel() / n;
                    let vm = vm.data.clone();
                    let vd = self.nodes[divisor.0].value.data.clone();
                    accumulate(&mut grads, &self.nodes, *mat, |g| {
                        for x in 0..n {
                            if vd[x] != 0.0 {
                                for j in 0..d {
                                    g[x * d + j] += gout[x * d + j] / vd[x];
                                }
                            }
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *divisor, |g| {
                        for x in 0..n {
                            if vd[x] != 0.0 {
                                let mut s = 0.0;
                                for j in 0..d {
                                    s += gout[x * d + j] * vm[x * d + j];
                                }
                                g[x] -= s / (vd[x] * vd[x]);
                            }
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let out = node.value.data.clone();
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for i in 0..g.len() {
                            g[i] += gout[i] * out[i] * (1.0 - out[i]);
                        }
                    });
                }
                Op::Relu(a) => {
                    let va = self.nodes[a.0].value.data.clone();
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for i in 0..g.len() {
                            if va[i] > 0.0 {
                                g[i] += gout[i];
                            }
                        }
                    });
                }
                Op::Exp(a) => {
                    let out = node.value.data.clone();
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for i in 0..g.len() {
                            g[i] += gout[i] * out[i];
                        }
                    });
                }
                Op::Sum(a) => {
                    let go = gout[0];
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for gi in g.iter_mut() {
                            *gi += go;
                        }
                    });
                }
                Op::Mean(a) => {
                    let numel = self.nodes[a.0].value.numel();
                    let go = gout[0] / numel as f64;
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for gi in g.iter_mut() {
                            *gi += go;
                        }
                    });
                }
                Op::MeanRows(a) => {
                    let va = &self.nodes[a.0].value;
                    let (n, d) = (va.rows(), va.cols());
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for x in 0..n {
                            for j in 0..d {
                                g[x * d + j] += gout[j] / n as f64;
                            }
                        }
                    });
                }
                Op::Reshape(a) => {
                    accumulate(&mut grads, &self.nodes, *a, |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout) {
                            *gi += go;
                        }
                    });
                }
                Op::SelectRows {
                    mask,
                    on_true,
                    on_false,
                } => {
                    let n = mask.len();
                    let d = node.value.numel() / n;
                    let mask = Rc::clone(mask);
                    accumulate(&mut grads, &self.nodes, *on_true, |g| {
                        for x in 0..n {
                            if mask[x] {
                                for j in 0..d {
                                    g[x * d + j] += gout[x * d + j];
                                }
                            }
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *on_false, |g| {
                        for x in 0..n {
                            if !mask[x] {
                                for j in 0..d {
                                    g[x * d + j] += gout[x * d + j];
                                }
                            }
                        }
                    });
                }
                Op::GraphLaplacian { graph, f, w } => {
                    let graph = Rc::clone(graph);
                    let vf = self.nodes[f.0].value.data.clone();
                    let vw = self.nodes[w.0].value.data.clone();
                    accumulate(&mut grads, &self.nodes, *f, |g| {
                        // The Laplacian is self-adjoint: pull back by applying it to ḡ.
                        let back = laplacian_apply(&graph, &gout, &vw);
                        for (gi, b) in g.iter_mut().zip(back) {
                            *gi += b;
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *w, |g| {
                        for (eid, &(u, v)) in graph.edges().iter().enumerate() {
                            g[eid] += (gout[u] - gout[v]) * (vf[v] - vf[u]);
                        }
                    });
                }
                Op::GraphGamma { graph, f, h, w } => {
                    let graph = Rc::clone(graph);
                    let vf = self.nodes[f.0].value.data.clone();
                    let vh = self.nodes[h.0].value.data.clone();
                    let vw = self.nodes[w.0].value.data.clone();
                    let lap_h = laplacian_apply(&graph, &vh, &vw);
                    let lap_f = laplacian_apply(&graph, &vf, &vw);
                    accumulate(&mut grads, &self.nodes, *f, |g| {
                        gamma_pullback(&graph, &gout, &vh, &lap_h, &vw, g);
                    });
                    accumulate(&mut grads, &self.nodes, *h, |g| {
                        gamma_pullback(&graph, &gout, &vf, &lap_f, &vw, g);
                    });
                    accumulate(&mut grads, &self.nodes, *w, |g| {
                        for (eid, &(u, v)) in graph.edges().iter().enumerate() {
                            g[eid] += 0.5 * (vf[v] - vf[u]) * (vh[v] - vh[u]) * (gout[u] + gout[v]);
                        }
                    });
                }
                Op::GraphNeighborSum { graph, x, w } => {
                    let graph = Rc::clone(graph);
                    let vx = &self.nodes[x.0].value;
                    let d = vx.numel() / graph.n_vertices();
                    let vx = vx.data.clone();
                    let vw = self.nodes[w.0].value.data.clone();
                    accumulate(&mut grads, &self.nodes, *x, |g| {
                        let back = neighbor_sum_apply(&graph, &gout, d, &vw);
                        for (gi, b) in g.iter_mut().zip(back) {
                            *gi += b;
                        }
                    });
                    accumulate(&mut grads, &self.nodes, *w, |g| {
                        for (eid, &(u, v)) in graph.edges().iter().enumerate() {
                            let mut s = 0.0;
                            for j in 0..d {
                                s += gout[u * d + j] * vx[v * d + j]
                                    + gout[v * d + j] * vx[u * d + j];
                            }
                            g[eid] += s;
                        }
                    });
                }
                Op::WeightedDegree { graph, w } => {
                    let graph = Rc::clone(graph);
                    accumulate(&mut grads, &self.nodes, *w, |g| {
                        for (eid, &(u, v)) in graph.edges().iter().enumerate() {
                            g[eid] += gout[u] + gout[v];
                        }
                    });
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    mask,
                } => {
                    let v = &self.nodes[logits.0].value;
                    let (n, c) = (v.rows(), v.cols());
                    let count = mask.iter().filter(|&&m| m).count().max(1) as f64;
                    let vdata = v.data.clone();
                    let (labels, mask) = (Rc::clone(labels), Rc::clone(mask));
                    let go = gout[0];
                    accumulate(&mut grads, &self.nodes, *logits, |g| {
                        for x in 0..n {
                            if !mask[x] {
                                continue;
                            }
                            let row = &vdata[x * c..(x + 1) * c];
                            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let denom: f64 = row.iter().map(|&z| (z - m).exp()).sum();
                            for j in 0..c {
                                let p = (row[j] - m).exp() / denom;
                                let delta = if j == labels[x] { 1.0 } else { 0.0 };
                                g[x * c + j] += go * (p - delta) / count;
                            }
                        }
                    });
                }
                Op::MseMasked { pred, target, mask } => {
                    let vp = self.nodes[pred.0].value.data.clone();
                    let count = mask.iter().filter(|&&m| m).count().max(1) as f64;
                    let (target, mask) = (Rc::clone(target), Rc::clone(mask));
                    let go = gout[0];
                    accumulate(&mut grads, &self.nodes, *pred, |g| {
                        for x in 0..g.len() {
                            if mask[x] {
                                g[x] += go * 2.0 * (vp[x] - target[x]) / count;
                            }
                        }
                    });
                }
            }
        }

        let mut by_node = HashMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf {
                requires_grad: true,
            } = node.op
            {
                let data = grads[idx]
                    .take()
                    .unwrap_or_else(|| vec![0.0; node.value.numel()]);
                by_node.insert(
                    idx,
                    Tensor {
                        shape: node.value.shape.clone(),
                        data,
                    },
                );
            }
        }
        Ok(Gradients { by_node })
    }
}

fn accumulate(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    target: TensorId,
    apply: impl FnOnce(&mut Vec<f64>),
) {
    let slot = &mut grads[target.0];
    if slot.is_none() {
        *slot = Some(vec![0.0; nodes[target.0].value.numel()]);
    }
    apply(slot.as_mut().unwrap());
}

pub(crate) fn laplacian_apply(graph: &WeightedGraph, f: &[f64], w: &[f64]) -> Vec<f64> {
    let n = graph.n_vertices();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let mut s = 0.0;
        for (y, eid) in graph.neighbor_edge_iter(x) {
            s += w[eid] * (f[y] - f[x]);
        }
        out[x] = s;
    }
    out
}

pub(crate) fn gamma_apply(graph: &WeightedGraph, f: &[f64], h: &[f64], w: &[f64]) -> Vec<f64> {
    let n = graph.n_vertices();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let mut s = 0.0;
        for (y, eid) in graph.neighbor_edge_iter(x) {
            s += w[eid] * (f[y] - f[x]) * (h[y] - h[x]);
        }
        out[x] = 0.5 * s;
    }
    out
}

/// Adjoint of `f ↦ Γ(f, h)` at fixed `h`, accumulated into `g`.
fn gamma_pullback(
    graph: &WeightedGraph,
    gout: &[f64],
    h: &[f64],
    lap_h: &[f64],
    w: &[f64],
    g: &mut [f64],
) {
    let n = graph.n_vertices();
    for z in 0..n {
        let mut s = -0.5 * gout[z] * lap_h[z];
        for (x, eid) in graph.neighbor_edge_iter(z) {
            s += gout[x] * 0.5 * w[eid] * (h[z] - h[x]);
        }
        g[z] += s;
    }
}

pub(crate) fn neighbor_sum_apply(
    graph: &WeightedGraph,
    x: &[f64],
    d: usize,
    w: &[f64],
) -> Vec<f64> {
    let n = graph.n_vertices();
    let mut out = vec![0.0; n * d];
    for u in 0..n {
        for (y, eid) in graph.neighbor_edge_iter(u) {
            let wv = w[eid];
            for j in 0..d {
                out[u * d + j] += wv * x[y * d + j];
            }
        }
    }
    out
}
