//! Small dense linear-algebra helpers for symmetric matrices.
//!
//! Matrices are row-major `&[f64]` slices with an explicit dimension. This
//! covers exactly what the mixture models and PCA need: Cholesky
//! factorization, triangular solves, and a Jacobi eigendecomposition.

use alloc::vec;
use alloc::vec::Vec;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Returns `None` when the matrix is not positive definite (a non-positive
/// pivot shows up). Only the lower triangle of the result is meaningful;
/// the strict upper triangle is zeroed.
pub fn cholesky(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * dim + i] = libm::sqrt(sum);
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &[f64], dim: usize, b: &mut [f64]) {
    debug_assert_eq!(b.len(), dim);
    for i in 0..dim {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * dim + k] * b[k];
        }
        b[i] = sum / l[i * dim + i];
    }
}

/// `ln det(A)` given the Cholesky factor `L` of `A`.
pub fn log_det_from_cholesky(l: &[f64], dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        acc += libm::log(l[i * dim + i]);
    }
    2.0 * acc
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvector `k` occupies `eigenvectors[k * dim .. (k + 1) * dim]`.
pub fn symmetric_eigen(a: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    // v starts as identity and accumulates the rotations; kept row-major
    // with eigenvectors in columns until the final transpose.
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                s += m[p * dim + q] * m[p * dim + q];
            }
        }
        libm::sqrt(s)
    };

    let scale = off_norm(&m).max(1.0);
    let tol = 1e-15 * scale;

    for _sweep in 0..64 {
        if off_norm(&m) <= tol {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = m[p * dim + q];
                if libm::fabs(apq) <= 1e-300 {
                    continue;
                }
                let app = m[p * dim + p];
                let aqq = m[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;

                for k in 0..dim {
                    let mkp = m[k * dim + p];
                    let mkq = m[k * dim + q];
                    m[k * dim + p] = c * mkp - s * mkq;
                    m[k * dim + q] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[p * dim + k];
                    let mqk = m[q * dim + k];
                    m[p * dim + k] = c * mpk - s * mqk;
                    m[q * dim + k] = s * mpk + c * mqk;
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        m[j * dim + j]
            .partial_cmp(&m[i * dim + i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });

    let mut values = Vec::with_capacity(dim);
    let mut vectors = vec![0.0; dim * dim];
    for (rank, &col) in order.iter().enumerate() {
        values.push(m[col * dim + col]);
        for k in 0..dim {
            vectors[rank * dim + k] = v[k * dim + col];
        }
    }
    (values, vectors)
}
