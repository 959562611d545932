use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::EnvelopeCholesky;
use super::sparse::CsrMatrix;
use super::{fix_column_signs, sorted_symmetric_eigen};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSolver {
    /// Dense below `dense_threshold` vertices, Krylov above.
    Auto,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub solver: EigenSolver,
    pub dense_threshold: usize,
    /// Relative residual `‖Kx − λMx‖ / (‖K‖ ‖x‖)` every returned pair must reach.
    pub tolerance: f64,
    /// Krylov block width; eigenvalue multiplicities up to this size are resolved.
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            solver: EigenSolver::Auto,
            dense_threshold: 500,
            tolerance: 1e-10,
            block_size: 12,
            seed: 0x5eed_1a9c,
        }
    }
}

/// Lowest `k` eigenpairs of the pencil `stiffness x = λ diag(mass) x`.
///
/// `stiffness` must be symmetric positive semidefinite and `mass` strictly
/// positive. Eigenvectors come back mass-orthonormal, ascending by
/// eigenvalue, each with its largest-magnitude entry positive.
pub fn lowest_generalized_eigenpairs(
    stiffness: &CsrMatrix,
    mass: &[f64],
    k: usize,
    options: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mass.len();
    if stiffness.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: stiffness.dim(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot compute {k} eigenpairs of a {n}x{n} pencil"
        )));
    }
    let dense = match options.solver {
        EigenSolver::Dense => true,
        EigenSolver::Krylov => false,
        EigenSolver::Auto => n <= options.dense_threshold,
    };
    let (mut values, mut vectors) = if dense {
        dense_pairs(stiffness, mass, k)
    } else {
        block_krylov(stiffness, mass, k, options)?
    };
    for v in values.iter_mut() {
        // the pencil is semidefinite; anything below zero is rounding
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    fix_column_signs(&mut vectors);
    Ok((values, vectors))
}

fn dense_pairs(stiffness: &CsrMatrix, mass: &[f64], k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = mass.len();
    let inv_sqrt: Vec<f64> = mass.iter().map(|a| 1.0 / a.sqrt()).collect();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in stiffness.row(i) {
            b[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let (values, u) = sorted_symmetric_eigen(b);
    let vectors = DMatrix::from_fn(n, k, |r, c| u[(r, c)] * inv_sqrt[r]);
    (values[..k].to_vec(), vectors)
}

struct KrylovBasis<'a> {
    mass: &'a [f64],
    stiffness: &'a CsrMatrix,
    /// Mass-orthonormal columns.
    columns: Vec<Vec<f64>>,
    /// `stiffness * column` for each column.
    images: Vec<Vec<f64>>,
    /// Projected stiffness, grown one row/column at a time (row-major, dim x dim).
    projected: Vec<Vec<f64>>,
}

impl<'a> KrylovBasis<'a> {
    fn dim(&self) -> usize {
        self.columns.len()
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(x.iter().zip(y))
            .map(|(a, (p, q))| a * p * q)
            .sum()
    }

    /// Orthogonalizes `v` against the basis (two classical Gram–Schmidt
    /// passes) and appends it unless it is numerically dependent.
    fn push(&mut self, mut v: Vec<f64>) -> bool {
        let original = self.inner(&v, &v).sqrt();
        if !(original > 0.0) || !original.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.columns.iter().map(|c| self.inner(c, &v)).collect();
            for (c, h) in self.columns.iter().zip(&coeffs) {
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= h * y;
                }
            }
        }
        let norm = self.inner(&v, &v).sqrt();
        if norm <= 1e-10 * original {
            return false;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        let mut image = vec![0.0; v.len()];
        self.stiffness.mul_vec(&v, &mut image);
        let row: Vec<f64> = self
            .columns
            .iter()
            .map(|c| c.iter().zip(&image).map(|(a, b)| a * b).sum())
            .collect();
        let diag: f64 = v.iter().zip(&image).map(|(a, b)| a * b).sum();
        for (existing, h) in self.projected.iter_mut().zip(&row) {
            existing.push(*h);
        }
        let mut new_row = row;
        new_row.push(diag);
        self.projected.push(new_row);
        self.columns.push(v);
        self.images.push(image);
        true
    }
}

/// Shift-invert block Krylov with full reorthogonalization and explicit
/// Rayleigh–Ritz on the stiffness/mass pencil.
fn block_krylov(
    stiffness: &CsrMatrix,
    mass: &[f64],
    k: usize,
    options: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mass.len();
    let block = options.block_size.clamp(1, n);
    let scale = (0..n)
        .map(|i| stiffness.get(i, i) / mass[i])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let shift = 1e-8 * scale;
    let shifted_mass: Vec<f64> = mass.iter().map(|a| a * shift).collect();
    let factor = EnvelopeCholesky::factor(&stiffness.add_diagonal(&shifted_mass))?;
    let stiffness_norm = stiffness.norm_inf().max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let random_vector = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    };
    let mut basis = KrylovBasis {
        mass,
        stiffness,
        columns: Vec::new(),
        images: Vec::new(),
        projected: Vec::new(),
    };
    let mut frontier: Vec<Vec<f64>> = (0..block).map(|_| random_vector(&mut rng)).collect();
    let mut next_check = (k + block).min(n);

    loop {
        let mut accepted = Vec::new();
        for v in frontier.drain(..) {
            if basis.dim() >= n {
                break;
            }
            let before = basis.dim();
            if basis.push(v) {
                accepted.push(before);
            }
        }
        if accepted.is_empty() && basis.dim() < n {
            // invariant subspace reached; restart with fresh directions
            frontier = (0..block).map(|_| random_vector(&mut rng)).collect();
            continue;
        }

        if basis.dim() >= next_check || basis.dim() == n {
            let m = basis.dim();
            let h = DMatrix::from_fn(m, m, |i, j| {
                0.5 * (basis.projected[i][j] + basis.projected[j][i])
            });
            let (theta, y) = sorted_symmetric_eigen(h);
            let mut vectors = DMatrix::zeros(n, k);
            let mut worst: f64 = 0.0;
            for c in 0..k {
                let mut x = vec![0.0; n];
                let mut kx = vec![0.0; n];
                for j in 0..m {
                    let coeff = y[(j, c)];
                    if coeff == 0.0 {
                        continue;
                    }
                    for ((xi, kxi), (vi, wi)) in x
                        .iter_mut()
                        .zip(kx.iter_mut())
                        .zip(basis.columns[j].iter().zip(&basis.images[j]))
                    {
                        *xi += coeff * vi;
                        *kxi += coeff * wi;
                    }
                }
                let mut residual = 0.0;
                let mut x_norm = 0.0;
                for i in 0..n {
                    let r = kx[i] - theta[c] * mass[i] * x[i];
                    residual += r * r;
                    x_norm += x[i] * x[i];
                }
                let relative = residual.sqrt() / (stiffness_norm * x_norm.sqrt());
                worst = worst.max(relative);
                for (i, xi) in x.into_iter().enumerate() {
                    vectors[(i, c)] = xi;
                }
            }
            if worst <= options.tolerance || m == n {
                return Ok((theta[..k].to_vec(), vectors));
            }
            if m >= n {
                return Err(Error::Convergence(format!(
                    "residual {worst:e} after exhausting the space"
                )));
            }
            next_check = (m + (2 * block).max(k / 4)).min(n);
        }

        if basis.dim() >= n {
            continue;
        }
        frontier = accepted
            .iter()
            .map(|&j| {
                let mut z: Vec<f64> = basis.columns[j]
                    .iter()
                    .zip(mass)
                    .map(|(v, a)| v * a)
                    .collect();
                factor.solve_in_place(&mut z);
                z
            })
            .collect();
    }
}
