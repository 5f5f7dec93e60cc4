//! Spectral machinery for a single molecular graph.

mod eigen;

pub use eigen::eig_sym;

use crate::error::Result;
use crate::ingest::MolecularGraph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Adjacency, degree, Laplacians, lazy random walk and the eigensystem of the
/// normalized Laplacian for one graph.
#[derive(Clone, Debug)]
pub struct GraphMatrices<T> {
    pub adjacency: Matrix<T>,
    pub degree: Matrix<T>,
    pub laplacian: Matrix<T>,
    pub normalized_laplacian: Matrix<T>,
    /// Lazy walk `(I + D^-1 W) / 2`; zero-degree rows stay put (`T_ii = 1`).
    pub lazy_walk: Matrix<T>,
    /// Orthonormal eigenvectors of the normalized Laplacian, one per column.
    pub eigvecs: Matrix<T>,
    /// Eigenvalues of the normalized Laplacian, nondecreasing.
    pub eigvals: Vec<T>,
}

impl<T: Scalar> GraphMatrices<T> {
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }
}

/// Unweighted symmetric adjacency of a molecule; bond order is ignored.
pub fn adjacency_of<T: Scalar>(g: &MolecularGraph) -> Matrix<T> {
    let mut w = Matrix::zeros(g.n_atoms(), g.n_atoms());
    for b in &g.bonds {
        w[(b.a, b.b)] = T::one();
        w[(b.b, b.a)] = T::one();
    }
    w
}

pub fn build_matrices<T: Scalar>(g: &MolecularGraph) -> Result<GraphMatrices<T>> {
    from_adjacency(adjacency_of(g))
}

/// Builds every operator from a symmetric adjacency matrix.
///
/// Zero degrees map to zero in `D^-1` and `D^-1/2`, so an isolated node gets a
/// zero row in the normalized Laplacian and an identity row in the walk.
pub fn from_adjacency<T: Scalar>(w: Matrix<T>) -> Result<GraphMatrices<T>> {
    let n = w.rows();
    let deg: Vec<T> = (0..n).map(|i| w.row(i).iter().copied().sum()).collect();
    let inv_sqrt: Vec<T> = deg
        .iter()
        .map(|&d| {
            if d > T::zero() {
                d.sqrt().recip()
            } else {
                T::zero()
            }
        })
        .collect();
    let degree = Matrix::from_diag(&deg);
    let laplacian = degree.sub(&w);
    let normalized_laplacian =
        Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * laplacian[(i, j)] * inv_sqrt[j]);
    let half = T::of(0.5);
    let lazy_walk = Matrix::from_fn(n, n, |i, j| {
        if deg[i] > T::zero() {
            let step = w[(i, j)] / deg[i];
            if i == j {
                half + half * step
            } else {
                half * step
            }
        } else if i == j {
            T::one()
        } else {
            T::zero()
        }
    });
    let (eigvecs, eigvals) = eig_sym(&normalized_laplacian)?;
    Ok(GraphMatrices {
        adjacency: w,
        degree,
        laplacian,
        normalized_laplacian,
        lazy_walk,
        eigvecs,
        eigvals,
    })
}

/// Frobenius-relative error of `V diag(values) V^T` against `m`.
pub fn reconstruction_error<T: Scalar>(m: &Matrix<T>, vecs: &Matrix<T>, values: &[T]) -> T {
    let recon = vecs
        .matmul(&Matrix::from_diag(values))
        .matmul(&vecs.transpose());
    recon.sub(m).frobenius_norm() / m.frobenius_norm().max(T::min_positive_value())
}
