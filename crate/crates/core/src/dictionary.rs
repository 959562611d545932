//! Dictionaries of functions on a mesh, one column per atom.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geodesic::{geodesic_from, SampleSet};
use crate::mesh::{lumped_mass, MassMatrix, TriMesh};
use crate::spectral::EigenBasis;
use crate::Matrix;

pub const DEFAULT_SIGMA: f64 = 0.05;
pub const DEFAULT_Q: usize = 1000;
pub const DEFAULT_HEAT_TIME: f64 = 1e-2;
pub const DEFAULT_SPEC_ALPHA: f64 = 1e-4;
/// Eigenvalues at or below this are treated as the zero mode by the WKS.
pub const WKS_EIGENVALUE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recipe {
    Gauss,
    Adapt,
    Heat,
    Spec,
    Wks,
    WksPlusGauss,
    Wave,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::Gauss,
        Recipe::Adapt,
        Recipe::Heat,
        Recipe::Spec,
        Recipe::Wks,
        Recipe::WksPlusGauss,
        Recipe::Wave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Gauss => "gauss",
            Recipe::Adapt => "adapt",
            Recipe::Heat => "heat",
            Recipe::Spec => "spec",
            Recipe::Wks => "wks",
            Recipe::WksPlusGauss => "wks+gauss",
            Recipe::Wave => "wave",
        }
    }
}

/// Wave kernel signature scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WksParams {
    pub energy_scale_count: usize,
    /// Gaussian width in log-energy, as a multiple of `(log λ_max − log λ_min) / count`.
    pub variance_factor: f64,
}

impl Default for WksParams {
    fn default() -> Self {
        Self {
            energy_scale_count: 100,
            variance_factor: 7.0,
        }
    }
}

/// Parameters a dictionary was built with; fields a recipe does not use stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecipeParams {
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub t: Option<f64>,
    pub wks: Option<WksParams>,
    pub samples: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    pub atoms: Matrix,
    pub recipe: Recipe,
    pub params: RecipeParams,
}

impl Dictionary {
    /// Wraps a user-supplied matrix, rejecting non-finite entries and all-zero columns.
    pub fn new(atoms: Matrix, recipe: Recipe, params: RecipeParams) -> Result<Self> {
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("dictionary has non-finite entries".into()));
        }
        for (j, column) in atoms.column_iter().enumerate() {
            if column.iter().all(|v| *v == 0.0) {
                return Err(Error::ZeroNormColumn(j));
            }
        }
        Ok(Self {
            atoms,
            recipe,
            params,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn q(&self) -> usize {
        self.atoms.ncols()
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

fn check_samples(samples: &SampleSet, n: usize) -> Result<()> {
    if let Some(&bad) = samples.indices().iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!(
            "sample {bad} out of range for {n} vertices"
        )));
    }
    Ok(())
}

fn gaussian_columns(
    mesh: &TriMesh,
    samples: &SampleSet,
    sigma_of: impl Fn(usize) -> f64,
) -> Matrix {
    let n = mesh.vertex_count();
    let mut atoms = Matrix::zeros(n, samples.len());
    for (j, &s) in samples.indices().iter().enumerate() {
        let sigma = sigma_of(s);
        let field = geodesic_from(mesh, s);
        for (slot, d) in atoms.column_mut(j).iter_mut().zip(&field.distances) {
            *slot = (-d * d / sigma).exp();
        }
    }
    atoms
}

/// Geodesic Gaussians `exp(−G²/σ)` centred at the samples. `σ` is meant for
/// unit-area meshes.
pub fn gaussian_dictionary(mesh: &TriMesh, samples: &SampleSet, sigma: f64) -> Result<Dictionary> {
    check_positive("sigma", sigma)?;
    check_samples(samples, mesh.vertex_count())?;
    Ok(Dictionary {
        atoms: gaussian_columns(mesh, samples, |_| sigma),
        recipe: Recipe::Gauss,
        params: RecipeParams {
            sigma: Some(sigma),
            samples: Some(samples.indices().to_vec()),
            ..Default::default()
        },
    })
}

/// Per-vertex norm of the residual of the coordinate functions after
/// projection onto `basis`, min-max scaled to `[0, 1]`.
pub fn reconstruction_error(mesh: &TriMesh, mass: &MassMatrix, basis: &EigenBasis) -> Vec<f64> {
    let n = mesh.vertex_count();
    let x = Matrix::from_fn(n, 3, |i, c| mesh.positions()[i][c]);
    let weighted = Matrix::from_fn(n, 3, |i, c| mass.diagonal()[i] * x[(i, c)]);
    let coefficients = basis.atoms.transpose() * weighted;
    let residual = x - &basis.atoms * coefficients;
    let raw: Vec<f64> = residual.row_iter().map(|r| r.norm()).collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return alloc::vec![0.0; n];
    }
    raw.iter().map(|r| (r - lo) / (hi - lo)).collect()
}

/// Gaussians whose width shrinks to `0.6σ` where the LB basis reconstructs the
/// embedding worst.
pub fn adaptive_gaussian_dictionary(
    mesh: &TriMesh,
    samples: &SampleSet,
    sigma: f64,
    lb_basis: &EigenBasis,
) -> Result<Dictionary> {
    check_positive("sigma", sigma)?;
    check_samples(samples, mesh.vertex_count())?;
    if lb_basis.vertex_count() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: lb_basis.vertex_count(),
        });
    }
    let error = reconstruction_error(mesh, &lumped_mass(mesh), lb_basis);
    Ok(Dictionary {
        atoms: gaussian_columns(mesh, samples, |s| adapted_sigma(sigma, error[s])),
        recipe: Recipe::Adapt,
        params: RecipeParams {
            sigma: Some(sigma),
            samples: Some(samples.indices().to_vec()),
            ..Default::default()
        },
    })
}

/// `σ (1 − 0.4 e)` for a normalized reconstruction error `e ∈ [0, 1]`.
pub fn adapted_sigma(sigma: f64, error: f64) -> f64 {
    sigma * (1.0 - 0.4 * error)
}

/// Columns `Σ_ℓ g_ℓ φ_ℓ(s_j) φ_ℓ(·)` for every sample `s_j`.
fn filtered_columns(basis: &EigenBasis, samples: &SampleSet, coefficients: &[f64]) -> Matrix {
    let k = basis.k();
    let centers = Matrix::from_fn(k, samples.len(), |l, j| {
        coefficients[l] * basis.atoms[(samples.indices()[j], l)]
    });
    &basis.atoms * centers
}

fn spectral_dictionary(
    basis: &EigenBasis,
    samples: &SampleSet,
    coefficients: Vec<f64>,
    recipe: Recipe,
    params: RecipeParams,
) -> Result<Dictionary> {
    check_samples(samples, basis.vertex_count())?;
    Ok(Dictionary {
        atoms: filtered_columns(basis, samples, &coefficients),
        recipe,
        params: RecipeParams {
            samples: Some(samples.indices().to_vec()),
            ..params
        },
    })
}

/// Truncated heat kernels `h_t(s_j, ·)`.
pub fn heat_dictionary(samples: &SampleSet, basis: &EigenBasis, t: f64) -> Result<Dictionary> {
    check_positive("t", t)?;
    let coefficients = basis.eigenvalues.iter().map(|l| (-t * l).exp()).collect();
    spectral_dictionary(
        basis,
        samples,
        coefficients,
        Recipe::Heat,
        RecipeParams {
            t: Some(t),
            ..Default::default()
        },
    )
}

/// Spectral Gaussians with filter `e^{−αλ}`.
pub fn spec_dictionary(samples: &SampleSet, basis: &EigenBasis, alpha: f64) -> Result<Dictionary> {
    check_positive("alpha", alpha)?;
    let coefficients = basis
        .eigenvalues
        .iter()
        .map(|l| (-alpha * l).exp())
        .collect();
    spectral_dictionary(
        basis,
        samples,
        coefficients,
        Recipe::Spec,
        RecipeParams {
            alpha: Some(alpha),
            ..Default::default()
        },
    )
}

/// Band-pass filter `tλe^{−tλ}`, peaking at `λ = 1/t` and vanishing on constants.
pub fn wave_dictionary(samples: &SampleSet, basis: &EigenBasis, t: f64) -> Result<Dictionary> {
    check_positive("t", t)?;
    let coefficients = basis
        .eigenvalues
        .iter()
        .map(|l| t * l * (-t * l).exp())
        .collect();
    spectral_dictionary(
        basis,
        samples,
        coefficients,
        Recipe::Wave,
        RecipeParams {
            t: Some(t),
            ..Default::default()
        },
    )
}

/// Log-energy grid and Gaussian width used by [`wks_dictionary`].
pub fn wks_energies(eigenvalues: &[f64], params: &WksParams) -> Result<(Vec<f64>, f64)> {
    if params.energy_scale_count < 2 || !(params.variance_factor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid WKS parameters {params:?}"
        )));
    }
    let positive: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > WKS_EIGENVALUE_FLOOR)
        .collect();
    if positive.len() < 2 {
        return Err(Error::DegenerateSpectrum);
    }
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).ln();
    let hi = positive.iter().copied().fold(0.0, f64::max).ln();
    let count = params.energy_scale_count;
    let sigma = params.variance_factor * (hi - lo) / count as f64;
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let (first, last) = (lo + 2.0 * sigma, hi - 2.0 * sigma);
    let energies = (0..count)
        .map(|i| first + (last - first) * i as f64 / (count - 1) as f64)
        .collect();
    Ok((energies, sigma))
}

/// One column per energy scale:
/// `Σ_ℓ exp(−(e − log λ_ℓ)² / 2σ²) φ_ℓ² / Σ_ℓ exp(−(e − log λ_ℓ)² / 2σ²)`,
/// summed over the positive part of the spectrum.
pub fn wks_dictionary(basis: &EigenBasis, params: &WksParams) -> Result<Dictionary> {
    let (energies, sigma) = wks_energies(&basis.eigenvalues, params)?;
    let modes: Vec<usize> = (0..basis.k())
        .filter(|&l| basis.eigenvalues[l] > WKS_EIGENVALUE_FLOOR)
        .collect();
    let n = basis.vertex_count();
    let squared = Matrix::from_fn(n, modes.len(), |i, m| basis.atoms[(i, modes[m])].powi(2));
    let mut weights = Matrix::zeros(modes.len(), energies.len());
    for (c, e) in energies.iter().enumerate() {
        let exponents: Vec<f64> = modes
            .iter()
            .map(|&l| -(e - basis.eigenvalues[l].ln()).powi(2) / (2.0 * sigma * sigma))
            .collect();
        // shifting by the largest exponent leaves the normalized weights
        // unchanged and keeps narrow filters from underflowing to 0/0
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (m, x) in exponents.iter().enumerate() {
            let w = (x - top).exp();
            weights[(m, c)] = w;
            total += w;
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical(format!(
                "WKS weights degenerate at energy {e}"
            )));
        }
        for m in 0..modes.len() {
            weights[(m, c)] /= total;
        }
    }
    Ok(Dictionary {
        atoms: squared * weights,
        recipe: Recipe::Wks,
        params: RecipeParams {
            wks: Some(*params),
            ..Default::default()
        },
    })
}

/// Columns of `a` followed by the columns of `b`.
pub fn concat_dictionaries(a: &Dictionary, b: &Dictionary) -> Result<Dictionary> {
    if a.vertex_count() != b.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: a.vertex_count(),
            found: b.vertex_count(),
        });
    }
    let n = a.vertex_count();
    let mut atoms = Matrix::zeros(n, a.q() + b.q());
    atoms.columns_mut(0, a.q()).copy_from(&a.atoms);
    atoms.columns_mut(a.q(), b.q()).copy_from(&b.atoms);
    let recipe = match (a.recipe, b.recipe) {
        _ if b.q() == 0 => a.recipe,
        _ if a.q() == 0 => b.recipe,
        (Recipe::Gauss, Recipe::Wks) | (Recipe::Wks, Recipe::Gauss) => Recipe::WksPlusGauss,
        (r, _) => r,
    };
    let params = RecipeParams {
        sigma: a.params.sigma.or(b.params.sigma),
        alpha: a.params.alpha.or(b.params.alpha),
        t: a.params.t.or(b.params.t),
        wks: a.params.wks.or(b.params.wks),
        samples: a
            .params
            .samples
            .clone()
            .or_else(|| b.params.samples.clone()),
    };
    Ok(Dictionary {
        atoms,
        recipe,
        params,
    })
}
