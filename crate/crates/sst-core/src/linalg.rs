//! Dense symmetric eigendecomposition (cyclic Jacobi) and small helpers.
//! Deterministic and stable for the matrix sizes this crate works with
//! (tens of sentences per document pair).

use ndarray::{Array1, Array2};

pub const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 50_000;

/// Jacobi eigenvalue algorithm for a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns,
/// unordered; pair `i` satisfies `a v_i = lambda_i v_i`.
pub fn jacobi_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigh needs a square matrix");
    let mut d = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n < 2 {
        return ((0..n).map(|i| d[[i, i]]).collect(), v);
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        // Largest off-diagonal entry.
        let mut p = 0;
        let mut q = 1;
        let mut max = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let val = d[[i, j]].abs();
                if val > max {
                    max = val;
                    p = i;
                    q = j;
                }
            }
        }
        if max <= JACOBI_TOL {
            break;
        }

        let app = d[[p, p]];
        let aqq = d[[q, q]];
        let apq = d[[p, q]];
        let tau = (aqq - app) / (2.0 * apq);
        let t = if tau >= 0.0 {
            1.0 / (tau + (1.0 + tau * tau).sqrt())
        } else {
            -1.0 / (-tau + (1.0 + tau * tau).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;

        for i in 0..n {
            if i != p && i != q {
                let dip = d[[i, p]];
                let diq = d[[i, q]];
                d[[i, p]] = c * dip - s * diq;
                d[[p, i]] = d[[i, p]];
                d[[i, q]] = s * dip + c * diq;
                d[[q, i]] = d[[i, q]];
            }
        }
        d[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        d[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        d[[p, q]] = 0.0;
        d[[q, p]] = 0.0;

        for i in 0..n {
            let vip = v[[i, p]];
            let viq = v[[i, q]];
            v[[i, p]] = c * vip - s * viq;
            v[[i, q]] = s * vip + c * viq;
        }
    }

    ((0..n).map(|i| d[[i, i]]).collect(), v)
}

/// Spectral radius of a symmetric matrix.
pub fn spectral_radius_symmetric(a: &Array2<f64>) -> f64 {
    let (eigvals, _) = jacobi_eigh(a);
    eigvals.iter().fold(0.0, |acc, &l| acc.max(l.abs()))
}

pub fn l2_normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
}

pub fn row_sums(a: &Array2<f64>) -> Array1<f64> {
    a.sum_axis(ndarray::Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_recovers_known_eigenpairs() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (mut vals, vecs) = jacobi_eigh(&a);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-9);
        assert!((vals[1] - 3.0).abs() < 1e-9);
        // Eigenvectors stay orthonormal.
        let gram = vecs.t().dot(&vecs);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = array![
            [4.0, 1.0, 0.5],
            [1.0, 3.0, 0.2],
            [0.5, 0.2, 1.0],
        ];
        let (vals, vecs) = jacobi_eigh(&a);
        // A = V diag(vals) V^T
        let mut recon = Array2::<f64>::zeros((3, 3));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    recon[[i, j]] += vals[k] * vecs[[i, k]] * vecs[[j, k]];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((recon[[i, j]] - a[[i, j]]).abs() < 1e-8);
            }
        }
    }
}
