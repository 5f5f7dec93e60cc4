//! Cyclic Jacobi eigensolver for symmetric matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `M = V diag(values) V^T` of a symmetric matrix.
///
/// Eigenvalues are returned in nondecreasing order with matching eigenvector
/// columns. Each eigenvector is signed so that its largest-magnitude entry
/// (the first one, on ties) is positive.
pub fn eig_sym<T: Scalar>(m: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    let n = m.rows();
    let scale = m.frobenius_norm().max(T::one());
    let asym = m.max_asymmetry();
    if asym > T::of(1e-10) * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym.as_f64(),
        });
    }
    let tol = T::of(1e-12).max(T::of(10.0) * T::epsilon()) * scale;

    // Work on the symmetrized copy.
    let mut a = Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * T::of(0.5));
    let mut v = Matrix::identity(n);

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off.as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diag();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    fix_signs(&mut vecs);
    Ok((vecs, values))
}

fn off_diagonal_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Applies the Jacobi rotation that annihilates `a[p][q]`.
fn rotate<T: Scalar>(a: &mut Matrix<T>, v: &mut Matrix<T>, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (T::of(2.0) * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn fix_signs<T: Scalar>(v: &mut Matrix<T>) {
    let n = v.rows();
    let tie = T::of(1e-12).max(T::of(10.0) * T::epsilon());
    for k in 0..v.cols() {
        let max = (0..n).fold(T::zero(), |m, i| m.max(v[(i, k)].abs()));
        let pivot = (0..n).find(|&i| v[(i, k)].abs() >= max - tie);
        if let Some(i) = pivot {
            if v[(i, k)] < T::zero() {
                for r in 0..n {
                    v[(r, k)] = -v[(r, k)];
                }
            }
        }
    }
}
