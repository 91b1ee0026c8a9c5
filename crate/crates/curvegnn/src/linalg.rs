//! Small dense symmetric linear algebra used by the curvature pencil solver:
//! cyclic Jacobi eigendecomposition and a Cholesky-based SPD solve. Matrices
//! are row-major `Vec<f64>` of dimension `n * n`; the pencils involved are at
//! most 2-ball sized, so simplicity beats asymptotics here.

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and (optionally exploitable) eigenvectors as
/// columns of `vectors` (`vectors[i * n + k]` is component `i` of eigenvector
/// `k`). Input must be symmetric; only the symmetric part is read.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub n: usize,
}

pub fn sym_eigen(matrix: &[f64], n: usize) -> SymEigen {
    assert_eq!(matrix.len(), n * n, "matrix size mismatch");
    let mut a = matrix.to_vec();
    // Symmetrize defensively; polarization-built forms carry ~1e-17 noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 1 {
        let max_sweeps = 64;
        for _ in 0..max_sweeps {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
            if off.sqrt() <= 1e-300_f64.max(1e-15 * frobenius(&a, n)) {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Apply rotation on rows/cols p, q.
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + k] = v[i * n + src];
        }
    }
    SymEigen { values, vectors, n }
}

fn frobenius(a: &[f64], n: usize) -> f64 {
    a.iter().take(n * n).map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    sym_eigen(matrix, n).values[0]
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
/// Returns `None` when a pivot drops below the tolerance (not PD).
pub fn spd_solve(matrix: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(matrix.len(), n * n);
    assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

pub fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * n + j] * x[j];
        }
        out[i] = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_of_known_2x2() {
        // [[1.5, 1.0], [1.0, 1.5]] has eigenvalues 0.5 and 2.5.
        let e = sym_eigen(&[1.5, 1.0, 1.0, 1.5], 2);
        assert_abs_diff_eq!(e.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = vec![
            4.0, 1.0, -2.0, 0.5, //
            1.0, 3.0, 0.0, 1.5, //
            -2.0, 0.0, 5.0, -1.0, //
            0.5, 1.5, -1.0, 2.0,
        ];
        let n = 4;
        let e = sym_eigen(&a, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += e.vectors[i * n + k] * e.values[k] * e.vectors[j * n + k];
                }
                assert_abs_diff_eq!(s, a[i * n + j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn spd_solve_round_trip() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let x = spd_solve(&a, 2, &[1.0, 2.0]).unwrap();
        let back = matvec(&a, 2, &x);
        assert_abs_diff_eq!(back[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        assert!(spd_solve(&a, 2, &[1.0, 1.0]).is_none());
    }
}
