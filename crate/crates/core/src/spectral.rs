//! Cotangent Laplace–Beltrami operator and its truncated eigenbasis.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{lowest_generalized_eigenpairs, CsrMatrix, EigenOptions};
use crate::mesh::{cross, dot, lumped_mass, norm, sub, MassMatrix, TriMesh};
use crate::Matrix;

/// Cotangent stiffness matrix (positive semidefinite, rows sum to zero)
/// together with the lumped mass matrix of the same mesh.
#[derive(Debug, Clone)]
pub struct Laplacian {
    stiffness: CsrMatrix,
    mass: MassMatrix,
}

impl Laplacian {
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }
}

/// Cotangent of the angle between `u` and `v`.
fn cotangent(u: [f64; 3], v: [f64; 3]) -> f64 {
    dot(u, v) / norm(cross(u, v))
}

/// Assembles the half-cotangent weights `w_ij = (cot α + cot β) / 2` per edge;
/// off-diagonal entries are `-w_ij` and the diagonal is the negated row sum.
/// Boundary edges get the single available cotangent (natural boundary).
pub fn cotangent_laplacian(mesh: &TriMesh) -> Result<Laplacian> {
    let n = mesh.vertex_count();
    let mut weights = vec![0.0; mesh.edges().len()];
    let p = mesh.positions();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (o, a, b) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let cot = cotangent(sub(p[a], p[o]), sub(p[b], p[o]));
            if !cot.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite cotangent at vertex {o} of triangle {t:?}"
                )));
            }
            let e = mesh.edge_index(a, b).expect("triangle edge exists");
            weights[e] += 0.5 * cot;
        }
    }
    let mut triplets = Vec::with_capacity(2 * weights.len() + n);
    let mut diagonal = vec![0.0; n];
    for (e, w) in mesh.edges().iter().zip(&weights) {
        triplets.push((e.a, e.b, -w));
        triplets.push((e.b, e.a, -w));
        diagonal[e.a] += w;
        diagonal[e.b] += w;
    }
    triplets.extend(diagonal.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(Laplacian {
        stiffness: CsrMatrix::from_triplets(n, triplets),
        mass: lumped_mass(mesh),
    })
}

/// First `k` generalized eigenpairs of a [`Laplacian`].
#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// `n x k`, mass-orthonormal columns.
    pub atoms: Matrix,
    /// Ascending, nonnegative.
    pub eigenvalues: Vec<f64>,
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn vertex_count(&self) -> usize {
        self.atoms.nrows()
    }

    /// The first `k` atoms only.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.k());
        Self {
            atoms: self.atoms.columns(0, k).into_owned(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
        }
    }
}

pub fn eigenbasis(lap: &Laplacian, k: usize) -> Result<EigenBasis> {
    eigenbasis_with(lap, k, &EigenOptions::default())
}

pub fn eigenbasis_with(lap: &Laplacian, k: usize, options: &EigenOptions) -> Result<EigenBasis> {
    if k >= lap.dim() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be smaller than the vertex count {}",
            lap.dim()
        )));
    }
    let (eigenvalues, atoms) =
        lowest_generalized_eigenpairs(&lap.stiffness, lap.mass.diagonal(), k, options)?;
    Ok(EigenBasis { atoms, eigenvalues })
}

/// `fᵀ W f` with `W` the cotangent stiffness.
pub fn dirichlet_energy(f: &[f64], lap: &Laplacian) -> Result<f64> {
    if f.len() != lap.dim() {
        return Err(Error::DimensionMismatch {
            expected: lap.dim(),
            found: f.len(),
        });
    }
    Ok(lap.stiffness.quadratic_form(f).max(0.0))
}

/// `Σ_ℓ c_ℓ φ_ℓ(center) φ_ℓ(·)` over the atoms of `basis`.
pub fn spectral_filter(
    basis: &EigenBasis,
    coefficients: &[f64],
    center: usize,
) -> Result<Vec<f64>> {
    if coefficients.len() != basis.k() {
        return Err(Error::DimensionMismatch {
            expected: basis.k(),
            found: coefficients.len(),
        });
    }
    if center >= basis.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "vertex {center} out of range"
        )));
    }
    let weights: Vec<f64> = coefficients
        .iter()
        .enumerate()
        .map(|(l, c)| c * basis.atoms[(center, l)])
        .collect();
    let n = basis.vertex_count();
    let mut out = vec![0.0; n];
    for (l, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(basis.atoms.column(l).iter()) {
            *o += w * a;
        }
    }
    Ok(out)
}

/// Truncated heat kernel `h_t(source, ·) = Σ_ℓ e^{-tλ_ℓ} φ_ℓ(source) φ_ℓ(·)`.
pub fn heat_kernel_column(basis: &EigenBasis, source: usize, t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diffusion time {t} must be positive"
        )));
    }
    let coefficients: Vec<f64> = basis.eigenvalues.iter().map(|l| (-t * l).exp()).collect();
    spectral_filter(basis, &coefficients, source)
}
