use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::sparse::{reverse_cuthill_mckee, CsrMatrix};
use crate::error::{Error, Result};

/// Cholesky factor `P K Pᵀ = L Lᵀ` of a sparse symmetric positive definite
/// matrix, stored row-wise over the envelope of an RCM-reordered matrix.
///
/// Row `i` of `L` holds columns `first[i]..=i`; fill-in never escapes the
/// envelope, so the storage is exact.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    order: Vec<usize>,
    inverse: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.dim();
        let order = reverse_cuthill_mckee(matrix);
        let mut inverse = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in order.iter().enumerate() {
            for (j, _) in matrix.row(old) {
                first[new] = first[new].min(inverse[j]);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for (new, &old) in order.iter().enumerate() {
            for (j, v) in matrix.row(old) {
                let col = inverse[j];
                if col <= new {
                    values[start[new] + col - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = start[j];
                let mut s = values[row_i + j - fi];
                let a = &values[row_i + lo - fi..row_i + j - fi];
                let b = &values[row_j + lo - fj..row_j + j - fj];
                s -= a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                let djj = values[row_j + j - fj];
                values[row_i + j - fi] = s / djj;
            }
            let off = &values[row_i..row_i + i - fi];
            let d = values[row_i + i - fi] - off.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            values[row_i + i - fi] = d.sqrt();
        }
        Ok(Self {
            order,
            inverse,
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `K x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi]
                .iter()
                .zip(&y[fi..i])
                .map(|(l, v)| l * v)
                .sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (p, l) in (fi..i).zip(&row[..i - fi]) {
                y[p] -= l * xi;
            }
        }
        for (old, slot) in b.iter_mut().enumerate() {
            *slot = y[self.inverse[old]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::spectral::cotangent_laplacian;

    #[test]
    fn solves_shifted_laplacian_system() {
        let mesh = shapes::icosphere(2);
        let lap = cotangent_laplacian(&mesh).unwrap();
        let shift: Vec<f64> = lap.mass().diagonal().iter().map(|a| 0.5 * a).collect();
        let k = lap.stiffness().add_diagonal(&shift);
        let chol = EnvelopeCholesky::factor(&k).unwrap();
        let n = mesh.vertex_count();
        let x_true: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut b = vec![0.0; n];
        k.mul_vec(&x_true, &mut b);
        chol.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
        // RCM keeps the envelope well below the dense triangle
        assert!(chol.envelope_size() < n * (n + 1) / 4);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m =
            CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            EnvelopeCholesky::factor(&m),
            Err(Error::Numerical(_))
        ));
    }
}
