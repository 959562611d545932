//! Functional maps between two meshes: from point-wise correspondences, from
//! descriptors with product preservation, back to point-wise, and ZoomOut.
//!
//! Throughout, `M` is the target of a point-wise map `N → M` and `C` takes
//! coefficients on `M` to coefficients on `N` (pull-back of functions).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geodesic::geodesic_from;
use crate::mesh::{MassMatrix, TriMesh};
use crate::pcd::Basis;
use crate::Matrix;

pub const DEFAULT_K_INI: usize = 16;
pub const DEFAULT_ZOOMOUT_STEP: usize = 2;
pub const DEFAULT_LANDMARK_SIGMA: f64 = 0.01;

/// For every vertex of `N`, a vertex of `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointwiseMap {
    assignment: Vec<usize>,
    target_count: usize,
}

impl PointwiseMap {
    pub fn new(assignment: Vec<usize>, target_count: usize) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&x| x >= target_count) {
            return Err(Error::InvalidArgument(format!(
                "target vertex {bad} out of range for {target_count} vertices"
            )));
        }
        Ok(Self {
            assignment,
            target_count,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            target_count: n,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn source_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }
}

/// Known correspondences `(vertex on N, vertex on M)`, possibly for a subset of `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pairs: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn dense(map: &PointwiseMap) -> Self {
        Self {
            pairs: map.assignment().iter().copied().enumerate().collect(),
        }
    }

    pub fn sparse(
        pairs: Vec<(usize, usize)>,
        source_count: usize,
        target_count: usize,
    ) -> Result<Self> {
        check_pairs(&pairs, source_count, target_count)?;
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn check_pairs(pairs: &[(usize, usize)], source_count: usize, target_count: usize) -> Result<()> {
    let mut seen = vec![false; source_count];
    for &(y, x) in pairs {
        if y >= source_count || x >= target_count {
            return Err(Error::InvalidArgument(format!(
                "pair ({y}, {x}) out of range"
            )));
        }
        if core::mem::replace(&mut seen[y], true) {
            return Err(Error::InvalidArgument(format!("vertex {y} appears twice")));
        }
    }
    Ok(())
}

/// Landmark pairs `(vertex on N, vertex on M)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Landmarks {
    pairs: Vec<(usize, usize)>,
}

impl Landmarks {
    pub fn new(
        pairs: Vec<(usize, usize)>,
        source_count: usize,
        target_count: usize,
    ) -> Result<Self> {
        check_pairs(&pairs, source_count, target_count)?;
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// `k_N x k_M` matrix taking coefficients on `M` to coefficients on `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    pub c: Matrix,
}

impl FunctionalMap {
    pub fn k(&self) -> usize {
        self.c.ncols()
    }
}

fn mass_weighted(atoms: &Matrix, mass: &MassMatrix) -> Matrix {
    let mut out = atoms.clone();
    for (mut row, a) in out.row_iter_mut().zip(mass.diagonal()) {
        row *= *a;
    }
    out
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `C = Φ_Nᵀ A_N Φ_M[T̄, :]`: pull the atoms of `M` back to `N` through the map
/// and project them on the basis of `N`.
pub fn fmap_from_pointwise(
    map: &PointwiseMap,
    basis_m: &Basis,
    basis_n: &Basis,
    mass_n: &MassMatrix,
) -> Result<FunctionalMap> {
    check_len(basis_n.vertex_count(), map.source_count())?;
    check_len(basis_m.vertex_count(), map.target_count())?;
    check_len(basis_n.vertex_count(), mass_n.len())?;
    let pulled = basis_m.atoms.select_rows(map.assignment());
    Ok(FunctionalMap {
        c: mass_weighted(&basis_n.atoms, mass_n).transpose() * pulled,
    })
}

/// Nearest neighbour of every row of `queries` among the rows of `points`;
/// exact, ties to the lowest index.
pub fn nearest_rows(queries: &Matrix, points: &Matrix) -> Vec<usize> {
    // row-major copies keep the inner loop contiguous
    let k = points.ncols();
    let flat_points: Vec<f64> = points.transpose().as_slice().to_vec();
    let flat_queries: Vec<f64> = queries.transpose().as_slice().to_vec();
    flat_queries
        .chunks_exact(k.max(1))
        .take(queries.nrows())
        .map(|q| {
            let mut best = 0;
            let mut best_distance = f64::INFINITY;
            for (x, p) in flat_points.chunks_exact(k.max(1)).enumerate() {
                let mut d = 0.0;
                for (a, b) in q.iter().zip(p) {
                    let t = a - b;
                    d += t * t;
                    if d > best_distance {
                        break;
                    }
                }
                if d < best_distance {
                    best = x;
                    best_distance = d;
                }
            }
            best
        })
        .collect()
}

/// For each vertex `y` of `N`, the vertex `x` of `M` whose image `C Φ_M(x)`
/// is nearest to `Φ_N(y)`.
pub fn pointwise_from_fmap(
    fmap: &FunctionalMap,
    basis_m: &Basis,
    basis_n: &Basis,
) -> Result<PointwiseMap> {
    let (kn, km) = fmap.c.shape();
    if basis_n.k() < kn || basis_m.k() < km {
        return Err(Error::DimensionMismatch {
            expected: kn.max(km),
            found: basis_n.k().min(basis_m.k()),
        });
    }
    let targets = basis_m.atoms.columns(0, km) * fmap.c.transpose();
    let queries = basis_n.atoms.columns(0, kn).into_owned();
    Ok(PointwiseMap {
        assignment: nearest_rows(&queries, &targets),
        target_count: basis_m.vertex_count(),
    })
}

/// Everything about one side of a matching problem the estimator needs.
#[derive(Debug, Clone, Copy)]
pub struct Shape<'a> {
    pub mesh: &'a TriMesh,
    pub basis: &'a Basis,
    pub mass: &'a MassMatrix,
    /// `n x d`; channel `j` must mean the same thing on both shapes.
    pub descriptors: &'a Matrix,
}

/// Term weights of the product-preservation objective. Each term is divided
/// by its own squared Frobenius scale before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductPreservation {
    pub descriptor_weight: f64,
    pub product_weight: f64,
    pub landmark_sigma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ProductPreservation {
    fn default() -> Self {
        Self {
            descriptor_weight: 1.0,
            product_weight: 1.0,
            landmark_sigma: DEFAULT_LANDMARK_SIGMA,
            tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

/// Narrow geodesic Gaussians `exp(−d²/σ)` around each vertex, one column each.
pub fn landmark_functions(mesh: &TriMesh, vertices: &[usize], sigma: f64) -> Matrix {
    let mut out = Matrix::zeros(mesh.vertex_count(), vertices.len());
    for (j, &v) in vertices.iter().enumerate() {
        for (slot, d) in out
            .column_mut(j)
            .iter_mut()
            .zip(geodesic_from(mesh, v).distances)
        {
            *slot = (-d * d / sigma).exp();
        }
    }
    out
}

/// Descriptors followed by landmark indicators, each channel scaled to unit mass norm.
fn constraint_functions(shape: &Shape, landmarks: &[usize], sigma: f64) -> Result<Matrix> {
    let n = shape.mesh.vertex_count();
    check_len(n, shape.descriptors.nrows())?;
    check_len(n, shape.basis.vertex_count())?;
    let d = shape.descriptors.ncols();
    let mut f = Matrix::zeros(n, d + landmarks.len());
    f.columns_mut(0, d).copy_from(shape.descriptors);
    f.columns_mut(d, landmarks.len())
        .copy_from(&landmark_functions(shape.mesh, landmarks, sigma));
    for mut column in f.column_iter_mut() {
        let norm = shape.mass.norm(column.as_slice());
        if norm > 0.0 {
            column /= norm;
        }
    }
    Ok(f)
}

/// `Φᵀ A diag(f) Φ` for each column `f`.
fn multiplication_operators(basis: &Matrix, mass: &MassMatrix, functions: &Matrix) -> Vec<Matrix> {
    let weighted = mass_weighted(basis, mass);
    functions
        .column_iter()
        .map(|f| {
            let mut scaled = basis.clone();
            for (mut row, v) in scaled.row_iter_mut().zip(f.iter()) {
                row *= *v;
            }
            weighted.transpose() * scaled
        })
        .collect()
}

/// Minimizes `w_d ‖C Â − B̂‖² / ‖Â‖² + w_p Σ_f ‖C X_f − Y_f C‖² / Σ_f ‖X_f‖²`
/// by conjugate gradients on the normal equations, where `Â`, `B̂` are the
/// coefficients of descriptors plus landmark indicators on `M` and `N`, and
/// `X_f`, `Y_f` the matching multiplication operators. `k` is taken from the
/// bases (truncate them first for a smaller map).
pub fn estimate_fmap_product_preservation(
    m: &Shape,
    n: &Shape,
    landmarks: &Landmarks,
    weights: &ProductPreservation,
) -> Result<FunctionalMap> {
    if m.descriptors.ncols() != n.descriptors.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.descriptors.ncols(),
            found: n.descriptors.ncols(),
        });
    }
    let on_n: Vec<usize> = landmarks.pairs().iter().map(|p| p.0).collect();
    let on_m: Vec<usize> = landmarks.pairs().iter().map(|p| p.1).collect();
    let fm = constraint_functions(m, &on_m, weights.landmark_sigma)?;
    let fn_ = constraint_functions(n, &on_n, weights.landmark_sigma)?;
    let a = mass_weighted(&m.basis.atoms, m.mass).transpose() * &fm;
    let b = mass_weighted(&n.basis.atoms, n.mass).transpose() * &fn_;
    let xs = multiplication_operators(&m.basis.atoms, m.mass, &fm);
    let ys = multiplication_operators(&n.basis.atoms, n.mass, &fn_);

    let a_scale = a.norm_squared();
    let x_scale: f64 = xs.iter().map(|x| x.norm_squared()).sum();
    let wd = if a_scale > 0.0 {
        weights.descriptor_weight / a_scale
    } else {
        0.0
    };
    let wp = if x_scale > 0.0 {
        weights.product_weight / x_scale
    } else {
        0.0
    };
    if wd == 0.0 && wp == 0.0 {
        return Err(Error::SingularSystem);
    }
    let aat = &a * a.transpose();
    let rhs = (&b * a.transpose()) * wd;
    if rhs.norm() == 0.0 {
        return Err(Error::SingularSystem);
    }
    let apply = |c: &Matrix| -> Matrix {
        let mut out = (c * &aat) * wd;
        if wp > 0.0 {
            for (x, y) in xs.iter().zip(&ys) {
                let r = c * x - y * c;
                out += (&r * x.transpose() - y.transpose() * &r) * wp;
            }
        }
        out
    };
    let c = conjugate_gradient(apply, &rhs, weights.tolerance, weights.max_iterations)?;
    Ok(FunctionalMap { c })
}

/// CG for a symmetric positive semidefinite operator on matrices with the
/// Frobenius inner product. Stops at `‖r‖ ≤ tolerance · ‖rhs‖`.
fn conjugate_gradient(
    apply: impl Fn(&Matrix) -> Matrix,
    rhs: &Matrix,
    tolerance: f64,
    max_iterations: usize,
) -> Result<Matrix> {
    let target = tolerance * rhs.norm();
    let mut x = Matrix::zeros(rhs.nrows(), rhs.ncols());
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for _ in 0..max_iterations {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        let ap = apply(&p);
        let curvature = p.dot(&ap);
        if !(curvature > 0.0) {
            return Err(Error::SingularSystem);
        }
        let step = rr / curvature;
        x += &p * step;
        r -= &ap * step;
        let next = r.norm_squared();
        p = &r + &p * (next / rr);
        rr = next;
    }
    if rr.sqrt() <= target {
        return Ok(x);
    }
    Err(Error::Convergence(format!(
        "normal-equation residual {:e} after {max_iterations} iterations",
        rr.sqrt() / rhs.norm()
    )))
}

/// Result of [`zoomout_refine`].
#[derive(Debug, Clone)]
pub struct ZoomOut {
    pub fmap: FunctionalMap,
    pub map: PointwiseMap,
    pub rounds: usize,
}

/// Alternates point-wise conversion and functional-map recomputation, growing
/// the map by `step` until it reaches `k_final`.
pub fn zoomout_refine(
    initial: &FunctionalMap,
    basis_m: &Basis,
    basis_n: &Basis,
    mass_n: &MassMatrix,
    k_final: usize,
    step: usize,
) -> Result<ZoomOut> {
    let (rows, k_ini) = initial.c.shape();
    if rows != k_ini || k_ini > k_final || step == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot refine a {rows}x{k_ini} map to {k_final} with step {step}"
        )));
    }
    if basis_m.k() < k_final || basis_n.k() < k_final {
        return Err(Error::DimensionMismatch {
            expected: k_final,
            found: basis_m.k().min(basis_n.k()),
        });
    }
    let mut fmap = initial.clone();
    let mut k = k_ini;
    let mut rounds = 0;
    while k < k_final {
        let map = pointwise_from_fmap(&fmap, basis_m, basis_n)?;
        k = (k + step).min(k_final);
        fmap = fmap_from_pointwise(&map, &basis_m.truncated(k), &basis_n.truncated(k), mass_n)?;
        rounds += 1;
    }
    let map = pointwise_from_fmap(&fmap, basis_m, basis_n)?;
    Ok(ZoomOut { fmap, map, rounds })
}
