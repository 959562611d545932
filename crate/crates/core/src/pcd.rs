//! Area-weighted, uncentered PCA of a dictionary and the [`Basis`] it yields.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::SVD;

use crate::dictionary::{Dictionary, Recipe, RecipeParams};
use crate::error::{Error, Result};
use crate::linalg::fix_column_signs;
use crate::mesh::MassMatrix;
use crate::spectral::{EigenBasis, Laplacian};
use crate::Matrix;

pub const DEFAULT_K: usize = 60;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSource {
    Lb,
    Pcd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub recipe: Recipe,
    pub params: RecipeParams,
}

/// `k` mass-orthonormal functions, either Laplace–Beltrami eigenfunctions or
/// principal components of a dictionary.
#[derive(Debug, Clone)]
pub struct Basis {
    pub atoms: Matrix,
    pub source: BasisSource,
    pub provenance: Option<Provenance>,
    /// PCD only, nonincreasing.
    pub singular_values: Vec<f64>,
    /// LB only, ascending.
    pub eigenvalues: Vec<f64>,
}

impl Basis {
    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn vertex_count(&self) -> usize {
        self.atoms.nrows()
    }

    /// The first `k` atoms, keeping the source metadata.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.k());
        Self {
            atoms: self.atoms.columns(0, k).into_owned(),
            source: self.source,
            provenance: self.provenance.clone(),
            singular_values: self.singular_values.iter().take(k).copied().collect(),
            eigenvalues: self.eigenvalues.iter().take(k).copied().collect(),
        }
    }

    /// Embedding of vertex `v`: the atom values at `v`.
    pub fn embedding(&self, v: usize) -> Vec<f64> {
        self.atoms.row(v).iter().copied().collect()
    }
}

impl From<EigenBasis> for Basis {
    fn from(basis: EigenBasis) -> Self {
        Self {
            atoms: basis.atoms,
            source: BasisSource::Lb,
            provenance: None,
            singular_values: Vec::new(),
            eigenvalues: basis.eigenvalues,
        }
    }
}

fn check_mass(n: usize, mass: &MassMatrix) -> Result<()> {
    if mass.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mass.len(),
        });
    }
    Ok(())
}

/// Scales every column to unit mass norm.
pub fn normalize_dictionary(dict: &Dictionary, mass: &MassMatrix) -> Result<Dictionary> {
    check_mass(dict.vertex_count(), mass)?;
    let mut atoms = dict.atoms.clone();
    for (j, mut column) in atoms.column_iter_mut().enumerate() {
        let norm = mass.norm(column.as_slice());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNormColumn(j));
        }
        column /= norm;
    }
    Ok(Dictionary {
        atoms,
        recipe: dict.recipe,
        params: dict.params.clone(),
    })
}

/// What to do when the dictionary's numerical rank is below `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankPolicy {
    /// Fail with [`Error::RankDeficient`].
    Strict,
    /// Keep the trailing singular directions anyway; they are orthonormal but
    /// carry no dictionary energy. Needs at least `k` columns.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcdOptions {
    pub k: usize,
    pub normalize: bool,
    pub rank_policy: RankPolicy,
}

impl Default for PcdOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            normalize: true,
            rank_policy: RankPolicy::Strict,
        }
    }
}

/// Square roots of the mass diagonal times the dictionary: the matrix whose
/// singular vectors are the principal components in the area inner product.
fn weighted(dict: &Matrix, mass: &MassMatrix) -> Matrix {
    let mut w = dict.clone();
    for (mut row, a) in w.row_iter_mut().zip(mass.diagonal()) {
        row *= a.sqrt();
    }
    w
}

/// Principal components of `dict`: the `k`-dimensional mass-orthonormal
/// basis minimizing the summed squared mass-norm residual of the columns.
pub fn pcd(dict: &Dictionary, mass: &MassMatrix, k: usize, normalize: bool) -> Result<Basis> {
    pcd_with(
        dict,
        mass,
        &PcdOptions {
            k,
            normalize,
            rank_policy: RankPolicy::Strict,
        },
    )
}

pub fn pcd_with(dict: &Dictionary, mass: &MassMatrix, options: &PcdOptions) -> Result<Basis> {
    let k = options.k;
    let n = dict.vertex_count();
    check_mass(n, mass)?;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} atoms on {n} vertices"
        )));
    }
    if dict.q() == 0 {
        return Err(Error::EmptyInput("dictionary"));
    }
    let dict = if options.normalize {
        normalize_dictionary(dict, mass)?
    } else {
        dict.clone()
    };
    let (values, u) = weighted_svd(&weighted(&dict.atoms, mass))?;
    let rank = values
        .iter()
        .take_while(|&&s| s >= RANK_TOLERANCE * values[0] && s > 0.0)
        .count();
    let available = match options.rank_policy {
        RankPolicy::Strict => rank,
        RankPolicy::Complete => values.len(),
    };
    if available < k {
        return Err(Error::RankDeficient { requested: k, rank });
    }
    let mut atoms = Matrix::from_fn(n, k, |i, j| u[(i, j)] / mass.diagonal()[i].sqrt());
    fix_column_signs(&mut atoms);
    Ok(Basis {
        atoms,
        source: BasisSource::Pcd,
        provenance: Some(Provenance {
            recipe: dict.recipe,
            params: dict.params.clone(),
        }),
        singular_values: values[..k].to_vec(),
        eigenvalues: Vec::new(),
    })
}

/// Thin SVD with singular values sorted in decreasing order.
fn weighted_svd(w: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let svd = SVD::try_new(w.clone(), true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("SVD did not converge".into()))?;
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok((values, u))
}

/// All singular values of the mass-weighted (optionally normalized)
/// dictionary, decreasing. Their squared tail past `k` is the residual of
/// the rank-`k` basis.
pub fn dictionary_spectrum(
    dict: &Dictionary,
    mass: &MassMatrix,
    normalize: bool,
) -> Result<Vec<f64>> {
    check_mass(dict.vertex_count(), mass)?;
    let dict = if normalize {
        normalize_dictionary(dict, mass)?
    } else {
        dict.clone()
    };
    let w = weighted(&dict.atoms, mass);
    let svd = SVD::try_new(w, false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("SVD did not converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// `Σ_j ‖d_j − P Pᵀ A d_j‖²_A` over the columns of `atoms`.
pub fn reconstruction_error(basis: &Basis, mass: &MassMatrix, atoms: &Matrix) -> Result<f64> {
    check_mass(basis.vertex_count(), mass)?;
    if atoms.nrows() != basis.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: basis.vertex_count(),
            found: atoms.nrows(),
        });
    }
    let mut weighted = atoms.clone();
    for (mut row, a) in weighted.row_iter_mut().zip(mass.diagonal()) {
        row *= *a;
    }
    let coefficients = basis.atoms.transpose() * weighted;
    let residual = atoms - &basis.atoms * coefficients;
    Ok(residual
        .column_iter()
        .map(|c| mass.inner(c.as_slice(), c.as_slice()))
        .sum())
}

/// Coefficients `Φᵀ A f`.
pub fn project(basis: &Basis, mass: &MassMatrix, f: &[f64]) -> Result<Vec<f64>> {
    check_mass(basis.vertex_count(), mass)?;
    if f.len() != basis.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: basis.vertex_count(),
            found: f.len(),
        });
    }
    Ok(basis
        .atoms
        .column_iter()
        .map(|c| mass.inner(c.as_slice(), f))
        .collect())
}

/// `Φ a`.
pub fn reconstruct(basis: &Basis, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != basis.k() {
        return Err(Error::DimensionMismatch {
            expected: basis.k(),
            found: a.len(),
        });
    }
    let mut out = alloc::vec![0.0; basis.vertex_count()];
    for (column, &c) in basis.atoms.column_iter().zip(a) {
        for (o, v) in out.iter_mut().zip(column.iter()) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Dirichlet energy of each atom, in atom order.
pub fn frequency_profile(basis: &Basis, lap: &Laplacian) -> Result<Vec<f64>> {
    if lap.dim() != basis.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: basis.vertex_count(),
            found: lap.dim(),
        });
    }
    Ok(basis
        .atoms
        .column_iter()
        .map(|c| lap.stiffness().quadratic_form(c.as_slice()).max(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lumped_mass, normalize_to_unit_area};
    use crate::shapes;
    use crate::spectral::{cotangent_laplacian, eigenbasis};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(atoms: Matrix) -> Dictionary {
        Dictionary {
            atoms,
            recipe: Recipe::Gauss,
            params: RecipeParams::default(),
        }
    }

    fn toy() -> (MassMatrix, Matrix) {
        let mesh = shapes::icosphere(1);
        let mass = lumped_mass(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Matrix::from_fn(mesh.vertex_count(), 8, |_, _| rng.random::<f64>() - 0.5);
        (mass, d)
    }

    fn gram(basis: &Basis, mass: &MassMatrix) -> Matrix {
        let k = basis.k();
        Matrix::from_fn(k, k, |i, j| {
            mass.inner(
                basis.atoms.column(i).as_slice(),
                basis.atoms.column(j).as_slice(),
            )
        })
    }

    fn projector(basis: &Basis, mass: &MassMatrix) -> Matrix {
        let mut pt = basis.atoms.transpose();
        for (mut c, a) in pt.column_iter_mut().zip(mass.diagonal()) {
            c *= *a;
        }
        &basis.atoms * pt
    }

    #[test]
    fn normalization_gives_unit_norms_and_is_idempotent() {
        let (mass, d) = toy();
        let once = normalize_dictionary(&dict(d), &mass).unwrap();
        for c in once.atoms.column_iter() {
            assert!((mass.norm(c.as_slice()) - 1.0).abs() < 1e-12);
        }
        let twice = normalize_dictionary(&once, &mass).unwrap();
        assert!((twice.atoms - &once.atoms).amax() < 1e-12);
    }

    #[test]
    fn constant_column_normalizes_to_one_on_unit_area() {
        let mesh = normalize_to_unit_area(&shapes::icosphere(1));
        let mass = lumped_mass(&mesh);
        let d = dict(Matrix::from_element(mesh.vertex_count(), 1, 3.5));
        let out = normalize_dictionary(&d, &mass).unwrap();
        assert!(out.atoms.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_column_is_reported() {
        let (mass, mut d) = toy();
        d.column_mut(5).fill(0.0);
        assert!(matches!(
            normalize_dictionary(&dict(d), &mass),
            Err(Error::ZeroNormColumn(5))
        ));
    }

    #[test]
    fn atoms_are_mass_orthonormal_with_sorted_singular_values() {
        let (mass, d) = toy();
        let basis = pcd(&dict(d), &mass, 4, true).unwrap();
        let g = gram(&basis, &mass);
        assert!((g - Matrix::identity(4, 4)).amax() < 1e-10);
        assert!(basis.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_one_dictionary() {
        let (mass, d) = toy();
        let column = d.columns(2, 1).into_owned();
        let basis = pcd(&dict(column.clone()), &mass, 1, false).unwrap();
        let scale = mass.norm(column.as_slice());
        let sign = basis.atoms[(0, 0)].signum() * column[(0, 0)].signum();
        for (a, c) in basis.atoms.iter().zip(column.iter()) {
            assert!((a - sign * c / scale).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_dictionary_spans_itself() {
        let mesh = shapes::icosphere(2);
        let lap = cotangent_laplacian(&mesh).unwrap();
        let lb: Basis = eigenbasis(&lap, 6).unwrap().into();
        let out = pcd(&dict(lb.atoms.clone()), lap.mass(), 6, true).unwrap();
        let diff = projector(&out, lap.mass()) - projector(&lb, lap.mass());
        assert!(diff.amax() < 1e-8);
    }

    #[test]
    fn residual_equals_singular_value_tail() {
        let (mass, d) = toy();
        let d = dict(d);
        let spectrum = dictionary_spectrum(&d, &mass, true).unwrap();
        let normalized = normalize_dictionary(&d, &mass).unwrap();
        for k in 1..8 {
            let basis = pcd(&d, &mass, k, true).unwrap();
            let residual = reconstruction_error(&basis, &mass, &normalized.atoms).unwrap();
            let tail: f64 = spectrum[k..].iter().map(|s| s * s).sum();
            assert!((residual - tail).abs() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn rank_deficiency_is_detected_and_can_be_completed() {
        let (mass, d) = toy();
        let mut low = Matrix::zeros(d.nrows(), 6);
        for j in 0..6 {
            let c = d.column(j % 3).into_owned() * (j + 1) as f64;
            low.set_column(j, &c);
        }
        let low = dict(low);
        assert!(matches!(
            pcd(&low, &mass, 4, true),
            Err(Error::RankDeficient {
                requested: 4,
                rank: 3
            })
        ));
        let options = PcdOptions {
            k: 4,
            normalize: true,
            rank_policy: RankPolicy::Complete,
        };
        let basis = pcd_with(&low, &mass, &options).unwrap();
        assert!((gram(&basis, &mass) - Matrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn column_scaling_is_irrelevant_when_normalizing() {
        let (mass, d) = toy();
        let a = pcd(&dict(d.clone()), &mass, 3, true).unwrap();
        let mut scaled = d;
        scaled.column_mut(1).scale_mut(10.0);
        let b = pcd(&dict(scaled), &mass, 3, true).unwrap();
        assert!((projector(&a, &mass) - projector(&b, &mass)).amax() < 1e-8);
    }

    #[test]
    fn project_and_reconstruct_round_trip() {
        let (mass, d) = toy();
        let basis = pcd(&dict(d), &mass, 5, true).unwrap();
        for i in 0..5 {
            let coeffs = project(&basis, &mass, basis.atoms.column(i).as_slice()).unwrap();
            for (j, c) in coeffs.iter().enumerate() {
                assert!((c - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
        let a = vec![0.3, -1.0, 2.0, 0.0, 0.5];
        let f = reconstruct(&basis, &a).unwrap();
        let back = project(&basis, &mass, &f).unwrap();
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(reconstruct(&basis, &[0.0; 5])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(matches!(
            project(&basis, &mass, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lb_profile_is_the_spectrum() {
        let mesh = normalize_to_unit_area(&shapes::icosphere(2));
        let lap = cotangent_laplacian(&mesh).unwrap();
        let eig = eigenbasis(&lap, 12).unwrap();
        let values = eig.eigenvalues.clone();
        let profile = frequency_profile(&eig.into(), &lap).unwrap();
        for (p, l) in profile.iter().zip(&values) {
            assert!((p - l).abs() < 1e-6);
        }
        assert!(profile[0] < 1e-9);
    }
}
