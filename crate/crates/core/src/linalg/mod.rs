//! Sparse storage, factorization and the generalized symmetric eigensolvers
//! behind the Laplace–Beltrami basis.

mod cholesky;
mod eigen;
mod sparse;

pub use self::cholesky::EnvelopeCholesky;
pub use self::eigen::{lowest_generalized_eigenpairs, EigenOptions, EigenSolver};
pub use self::sparse::{reverse_cuthill_mckee, CsrMatrix};

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigen-decomposition of a dense symmetric matrix with eigenvalues ascending.
pub fn sorted_symmetric_eigen(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Flips each column so its entry of largest magnitude (first one on ties) is positive.
pub fn fix_column_signs(matrix: &mut DMatrix<f64>) {
    for mut col in matrix.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col.len() > 0 && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
