//! Reverse-mode gradients against central finite differences for every
//! differentiable tape operation, for MLP forward passes, and for the full
//! curvature loss with learnable edge weights.

mod common;

use std::rc::Rc;

use common::{assert_gradients_match, fd_gradients, ParamSet};
use curvegnn::graph::{VertexFeatures, WeightedGraph};
use curvegnn::learn::{build_curvature_loss, FunctionFamily, LearnedCurvatureParams};
use curvegnn::nn::{SmoothMlp, TapeBinding};
use curvegnn::operators::{gamma2_taped, Gamma2Form};
use curvegnn::rng::stream;
use curvegnn::{Tape, Tensor, TensorId};
use rand::Rng;

fn random_vec(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = stream(seed, "gradcheck", 0);
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Checks one op: builds `loss = Σ c ⊙ op(inputs)` with a fixed random
/// cotangent `c`, compares backward against finite differences.
fn check_op(
    name: &str,
    inputs: ParamSet,
    seed: u64,
    build: impl Fn(&mut Tape, &[TensorId]) -> TensorId,
) {
    let run = |params: &ParamSet, want_grads: bool| -> (f64, Option<Vec<(String, Vec<f64>)>>) {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = params.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &ids);
        let numel = tape.value(out).numel();
        let shape = tape.value(out).shape().to_vec();
        let c = tape.constant(Tensor::vector(random_vec(numel, seed ^ 0xc0, -1.0, 1.0)));
        let c = tape.reshape(c, &shape);
        let prod = tape.mul(out, c);
        let loss = tape.sum(prod);
        let value = tape.value(loss).item();
        if want_grads {
            let grads = tape.backward(loss).unwrap();
            let collected = params
                .iter()
                .zip(&ids)
                .map(|((n, _), &id)| (n.clone(), grads.get(id).unwrap().data().to_vec()))
                .collect();
            (value, Some(collected))
        } else {
            (value, None)
        }
    };
    let (_, ad) = run(&inputs, true);
    let fd = fd_gradients(&inputs, 1e-5, |p| run(p, false).0);
    assert_gradients_match(&ad.unwrap(), &fd, 1e-5, name);
}

fn test_graph() -> Rc<WeightedGraph> {
    Rc::new(
        WeightedGraph::from_edges(
            5,
            &[
                (0, 1, 0.8),
                (0, 2, 1.3),
                (1, 2, 0.6),
                (2, 3, 1.7),
                (3, 4, 0.9),
                (1, 4, 1.1),
            ],
        )
        .unwrap(),
    )
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let a = Tensor::vector(random_vec(6, 1, -2.0, 2.0));
    let b = Tensor::vector(random_vec(6, 2, -2.0, 2.0));
    check_op(
        "add",
        vec![("a".into(), a.clone()), ("b".into(), b.clone())],
        11,
        |t, ids| t.add(ids[0], ids[1]),
    );
    check_op(
        "sub",
        vec![("a".into(), a.clone()), ("b".into(), b.clone())],
        12,
        |t, ids| t.sub(ids[0], ids[1]),
    );
    check_op(
        "mul",
        vec![("a".into(), a.clone()), ("b".into(), b.clone())],
        13,
        |t, ids| t.mul(ids[0], ids[1]),
    );
    check_op("neg", vec![("a".into(), a.clone())], 14, |t, ids| {
        t.neg(ids[0])
    });
    check_op("scale", vec![("a".into(), a.clone())], 15, |t, ids| {
        t.scale(ids[0], -1.7)
    });
    check_op("sigmoid", vec![("a".into(), a.clone())], 16, |t, ids| {
        t.sigmoid(ids[0])
    });
    check_op("exp", vec![("a".into(), a.clone())], 17, |t, ids| {
        t.exp(ids[0])
    });
    // keep relu inputs away from the kink
    let off = Tensor::vector(random_vec(6, 3, 0.2, 2.0));
    check_op("relu-positive", vec![("a".into(), off)], 18, |t, ids| {
        t.relu(ids[0])
    });
    let neg = Tensor::vector(random_vec(6, 4, -2.0, -0.2));
    check_op("relu-negative", vec![("a".into(), neg)], 19, |t, ids| {
        t.relu(ids[0])
    });
}

#[test]
fn matrix_ops_match_finite_differences() {
    let m = Tensor::matrix(4, 3, random_vec(12, 5, -2.0, 2.0));
    let w = Tensor::matrix(3, 2, random_vec(6, 6, -2.0, 2.0));
    let row = Tensor::vector(random_vec(3, 7, -2.0, 2.0));
    let div = Tensor::vector(random_vec(4, 8, 0.5, 2.0));
    check_op(
        "matmul",
        vec![("m".into(), m.clone()), ("w".into(), w.clone())],
        21,
        |t, ids| t.matmul(ids[0], ids[1]),
    );
    check_op(
        "add_rows",
        vec![("m".into(), m.clone()), ("r".into(), row)],
        22,
        |t, ids| t.add_rows(ids[0], ids[1]),
    );
    check_op(
        "div_rows",
        vec![("m".into(), m.clone()), ("d".into(), div)],
        23,
        |t, ids| t.div_rows(ids[0], ids[1]),
    );
    check_op("mean_rows", vec![("m".into(), m.clone())], 24, |t, ids| {
        t.mean_rows(ids[0])
    });
    check_op("sum", vec![("m".into(), m.clone())], 25, |t, ids| {
        t.sum(ids[0])
    });
    check_op("mean", vec![("m".into(), m.clone())], 26, |t, ids| {
        t.mean(ids[0])
    });
    check_op("reshape", vec![("m".into(), m.clone())], 27, |t, ids| {
        t.reshape(ids[0], &[12])
    });
    let other = Tensor::matrix(4, 3, random_vec(12, 9, -2.0, 2.0));
    check_op(
        "select_rows",
        vec![("a".into(), m), ("b".into(), other)],
        28,
        |t, ids| {
            let mask = Rc::new(vec![true, false, true, false]);
            t.select_rows(mask, ids[0], ids[1])
        },
    );
}

#[test]
fn graph_ops_match_finite_differences() {
    let g = test_graph();
    let f = Tensor::vector(random_vec(5, 31, -2.0, 2.0));
    let h = Tensor::vector(random_vec(5, 32, -2.0, 2.0));
    let w = Tensor::vector(random_vec(6, 33, 0.4, 2.0));
    let feats = Tensor::matrix(5, 3, random_vec(15, 34, -2.0, 2.0));

    let gc = g.clone();
    check_op(
        "graph_laplacian",
        vec![("f".into(), f.clone()), ("w".into(), w.clone())],
        41,
        move |t, ids| t.graph_laplacian(&gc, ids[0], ids[1]),
    );
    let gc = g.clone();
    check_op(
        "graph_gamma",
        vec![
            ("f".into(), f.clone()),
            ("h".into(), h),
            ("w".into(), w.clone()),
        ],
        42,
        move |t, ids| t.graph_gamma(&gc, ids[0], ids[1], ids[2]),
    );
    let gc = g.clone();
    check_op(
        "graph_gamma_diagonal",
        vec![("f".into(), f.clone()), ("w".into(), w.clone())],
        43,
        move |t, ids| t.graph_gamma(&gc, ids[0], ids[0], ids[1]),
    );
    let gc = g.clone();
    check_op(
        "graph_neighbor_sum",
        vec![("x".into(), feats), ("w".into(), w.clone())],
        44,
        move |t, ids| t.graph_neighbor_sum(&gc, ids[0], ids[1]),
    );
    let gc = g.clone();
    check_op(
        "weighted_degree",
        vec![("w".into(), w.clone())],
        45,
        move |t, ids| t.weighted_degree(&gc, ids[0]),
    );
    let gc = g.clone();
    check_op(
        "gamma2_composed",
        vec![("f".into(), f), ("w".into(), w)],
        46,
        move |t, ids| gamma2_taped(t, &gc, ids[0], ids[1], Gamma2Form::Operator),
    );
}

#[test]
fn loss_ops_match_finite_differences() {
    let logits = Tensor::matrix(4, 3, random_vec(12, 51, -1.5, 1.5));
    check_op(
        "softmax_cross_entropy",
        vec![("l".into(), logits)],
        52,
        |t, ids| {
            t.softmax_cross_entropy(
                ids[0],
                Rc::new(vec![0, 2, 1, 0]),
                Rc::new(vec![true, true, false, true]),
            )
        },
    );
    let pred = Tensor::vector(random_vec(5, 53, -2.0, 2.0));
    check_op("mse_masked", vec![("p".into(), pred)], 54, |t, ids| {
        t.mse_masked(
            ids[0],
            Rc::new(vec![0.3, -0.4, 1.0, 0.0, 2.0]),
            Rc::new(vec![true, false, true, true, true]),
        )
    });
}

#[test]
fn random_mlp_loss_matches_finite_differences() {
    let mut rng = stream(61, "mlp-grad", 0);
    let mlp = SmoothMlp::new(&[4, 8, 1], &mut rng).unwrap();
    let feats = VertexFeatures::new(6, 4, random_vec(24, 62, -2.0, 2.0)).unwrap();
    let feats_tensor = Tensor::matrix(6, 4, feats.data().to_vec());

    let mut params: ParamSet = Vec::new();
    mlp.visit_params("f", &mut |name, t| params.push((name, t.clone())));

    let eval = |p: &ParamSet| -> f64 {
        let mut mlp = mlp.clone();
        mlp.visit_params_mut("f", &mut |name, t| {
            let (_, src) = p.iter().find(|(n, _)| *n == name).unwrap();
            *t = src.clone();
        });
        let mut tape = Tape::new();
        let mut binding = TapeBinding::new();
        let f_id = tape.constant(feats_tensor.clone());
        let out = mlp.forward_taped(&mut tape, &mut binding, "f", f_id);
        let sq = tape.mul(out, out);
        let loss = tape.sum(sq);
        tape.value(loss).item()
    };

    let ad = {
        let mut tape = Tape::new();
        let mut binding = TapeBinding::new();
        let f_id = tape.constant(feats_tensor.clone());
        let out = mlp.forward_taped(&mut tape, &mut binding, "f", f_id);
        let sq = tape.mul(out, out);
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        let by_name = binding.gather(&grads);
        params
            .iter()
            .map(|(n, _)| (n.clone(), by_name[n].data().to_vec()))
            .collect::<Vec<_>>()
    };
    let fd = fd_gradients(&params, 1e-5, eval);
    assert_gradients_match(&ad, &fd, 1e-5, "mlp-loss");
}

#[test]
fn curvature_loss_matches_finite_differences_all_groups() {
    let g = test_graph();
    let feats = VertexFeatures::new(5, 3, random_vec(15, 71, -1.0, 1.0)).unwrap();
    let feats_tensor = Tensor::matrix(5, 3, feats.data().to_vec());
    let family = FunctionFamily::new(2, 3, 6, 72).unwrap();
    let mut curv = LearnedCurvatureParams::transductive(5, 0.8);
    curv.enable_learnable_weights(&g);
    // move κ̂ away from zero so some hinges are active and none sit on a kink
    curv.visit_params_mut(&mut |name, t| {
        if name == "kappa_hat" {
            for (i, v) in t.data_mut().iter_mut().enumerate() {
                *v = 0.37 * (i as f64 + 1.0) - 0.9;
            }
        }
    });

    let mut params: ParamSet = Vec::new();
    curv.visit_params(&mut |name, t| params.push((name, t.clone())));
    family.visit_params(&mut |name, t| params.push((name, t.clone())));

    let build_loss = |p: &ParamSet| -> (f64, Option<Vec<(String, Vec<f64>)>>) {
        let mut family = family.clone();
        let mut curv = curv.clone();
        let assign = |name: String, t: &mut Tensor| {
            if let Some((_, src)) = p.iter().find(|(n, _)| *n == name) {
                *t = src.clone();
            }
        };
        curv.visit_params_mut(&mut |n, t| assign(n, t));
        family.visit_params_mut(&mut |n, t| assign(n, t));
        let mut tape = Tape::new();
        let mut binding = TapeBinding::new();
        let f_id = tape.constant(feats_tensor.clone());
        let w_id = curv.bind_weights(&mut tape, &mut binding, &g);
        let build = build_curvature_loss(
            &mut tape,
            &mut binding,
            &g,
            &family,
            &curv,
            f_id,
            w_id,
            Gamma2Form::Operator,
        );
        let value = tape.value(build.loss).item();
        let grads = tape.backward(build.loss).unwrap();
        let by_name = binding.gather(&grads);
        let collected = params
            .iter()
            .map(|(n, _)| (n.clone(), by_name[n].data().to_vec()))
            .collect();
        (value, Some(collected))
    };

    let (_, ad) = build_loss(&params);
    let fd = fd_gradients(&params, 1e-6, |p| build_loss(p).0);
    assert_gradients_match(&ad.unwrap(), &fd, 1e-4, "curvature-loss");
}
