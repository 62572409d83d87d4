use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{dot, Matrix};

/// Random matrix with orthonormal columns (when `rows ≥ cols`) or rows
/// (otherwise), scaled by `gain`.
///
/// A Gaussian matrix is orthonormalized by modified Gram–Schmidt with one
/// re-orthogonalization pass, which keeps `QᵀQ` within 1e-12 of identity
/// for the sizes used here. The draw depends only on the generator state.
pub fn orthogonal_init<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Matrix {
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..long).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for k in 0..short {
        for _pass in 0..2 {
            for j in 0..k {
                let (done, rest) = basis.split_at_mut(k);
                let proj = dot(&done[j], &rest[0]);
                for (v, q) in rest[0].iter_mut().zip(&done[j]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = libm::sqrt(dot(&basis[k], &basis[k]));
        basis[k].iter_mut().for_each(|v| *v /= norm);
    }
    let mut m = Matrix::zeros(rows, cols);
    for (k, vec) in basis.iter().enumerate() {
        for (i, &v) in vec.iter().enumerate() {
            let (r, c) = if rows >= cols { (i, k) } else { (k, i) };
            m.set(r, c, gain * v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn gram_error(q: &Matrix) -> f64 {
        // Gram matrix on the smaller dimension.
        let g = if q.rows() >= q.cols() { q.transpose().matmul(q).unwrap() } else { q.matmul(&q.transpose()).unwrap() };
        let n = g.rows();
        let mut err: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                err = err.max((g.get(r, c) - target).abs());
            }
        }
        err
    }

    #[test]
    fn square_is_orthogonal() {
        let q = orthogonal_init(4, 4, 1.0, &mut rng::stream(1, 0));
        assert!(gram_error(&q) < 1e-6);
    }

    #[test]
    fn tall_has_orthonormal_columns() {
        let q = orthogonal_init(8, 3, 1.0, &mut rng::stream(2, 0));
        assert_eq!((q.rows(), q.cols()), (8, 3));
        assert!(gram_error(&q) < 1e-6);
    }

    #[test]
    fn wide_has_orthonormal_rows() {
        let q = orthogonal_init(3, 128, 1.0, &mut rng::stream(3, 0));
        assert!(gram_error(&q) < 1e-6);
        let big = orthogonal_init(256, 64, 1.0, &mut rng::stream(3, 1));
        assert!(gram_error(&big) < 1e-6);
    }

    #[test]
    fn zero_gain_is_zero_matrix() {
        let q = orthogonal_init(5, 2, 0.0, &mut rng::stream(4, 0));
        assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = orthogonal_init(6, 5, 1.0, &mut rng::stream(9, 2));
        let b = orthogonal_init(6, 5, 1.0, &mut rng::stream(9, 2));
        assert_eq!(a, b);
    }
}
