//! Shared helpers for integration tests: a central finite-difference gradient
//! oracle, independent of the tape's backward pass.
#![allow(dead_code)] // each test binary uses a subset

use curvegnn::Tensor;

/// Named parameter set that tests mutate entry-by-entry.
pub type ParamSet = Vec<(String, Tensor)>;

/// Central finite differences of `eval` with respect to every scalar in
/// `params`. `eval` must rebuild its computation from scratch on each call.
pub fn fd_gradients(
    params: &ParamSet,
    h: f64,
    mut eval: impl FnMut(&ParamSet) -> f64,
) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for pi in 0..params.len() {
        let numel = params[pi].1.numel();
        let mut grad = vec![0.0; numel];
        for j in 0..numel {
            let mut plus = params.to_vec();
            plus[pi].1.data_mut()[j] += h;
            let mut minus = params.to_vec();
            minus[pi].1.data_mut()[j] -= h;
            grad[j] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        out.push((params[pi].0.clone(), grad));
    }
    out
}

/// Mixed absolute/relative agreement: `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Asserts two gradient collections agree entry-wise at `tol`.
pub fn assert_gradients_match(
    ad: &[(String, Vec<f64>)],
    fd: &[(String, Vec<f64>)],
    tol: f64,
    context: &str,
) {
    assert_eq!(ad.len(), fd.len(), "{context}: parameter count mismatch");
    for ((name_a, ga), (name_b, gf)) in ad.iter().zip(fd) {
        assert_eq!(name_a, name_b, "{context}: parameter order mismatch");
        assert_eq!(ga.len(), gf.len(), "{context}: {name_a} length mismatch");
        for (j, (&a, &b)) in ga.iter().zip(gf).enumerate() {
            assert!(
                close(a, b, tol),
                "{context}: {name_a}[{j}] reverse-mode {a} vs finite-difference {b}"
            );
        }
    }
}
