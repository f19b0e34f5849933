//! Dense symmetric positive-definite factorization in packed lower storage.

use crate::scalar::Real;

/// Offset of row `i` in packed lower-triangular storage.
#[inline]
pub fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // four accumulators so the additions are not one serial dependency chain
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..a.len() {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cholesky factor `L` (`A = L Lᵀ`) of a packed lower-triangular symmetric
/// matrix, overwriting it in place. Returns `false` if `A` is not positive
/// definite.
pub fn cholesky_in_place<T: Real>(a: &mut [T], n: usize) -> bool {
    debug_assert_eq!(a.len(), row_start(n));
    for i in 0..n {
        let ri = row_start(i);
        for j in 0..=i {
            let rj = row_start(j);
            let s = a[ri + j] - dot(&a[ri..ri + j], &a[rj..rj + j]);
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return false;
                }
                a[ri + i] = s.sqrt();
            } else {
                a[ri + j] = s / a[rj + j];
            }
        }
    }
    true
}

/// Solves `L x = b` in place.
pub fn forward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let ri = row_start(i);
        let s = b[i] - dot(&l[ri..ri + i], &b[..i]);
        b[i] = s / l[ri + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn backward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let xi = b[i] / l[row_start(i) + i];
        b[i] = xi;
        for k in 0..i {
            b[k] = b[k] - l[row_start(i) + k] * xi;
        }
    }
}

/// `sum(log diag(L))`, half the log-determinant of `A`.
pub fn half_log_det<T: Real>(l: &[T], n: usize) -> T {
    (0..n).map(|i| l[row_start(i) + i].ln()).sum()
}
