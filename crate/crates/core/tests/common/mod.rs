#![allow(dead_code)]

use pcd_core::mesh::{normalize_to_unit_area, MassMatrix};
use pcd_core::{shapes, Matrix, TriMesh};
use rand::Rng;

/// Unit-area sphere with a smooth radial bump pattern, so that its spectrum
/// and its FPS distances have no exact ties.
pub fn lumpy_sphere(subdivisions: usize) -> TriMesh {
    let sphere = shapes::icosphere(subdivisions);
    let positions = sphere
        .positions()
        .iter()
        .map(|p| {
            let r = 1.0 + 0.15 * (3.0 * p[0] + 0.4).sin() * (2.0 * p[1] - 0.3).cos() + 0.05 * p[2];
            [p[0] * r * 1.3, p[1] * r, p[2] * r * 0.8]
        })
        .collect();
    normalize_to_unit_area(&sphere.with_positions(positions).unwrap())
}

/// Same surface with vertex `v` renamed `perm[v]`.
pub fn relabel(mesh: &TriMesh, perm: &[usize]) -> TriMesh {
    let mut positions = vec![[0.0; 3]; mesh.vertex_count()];
    for (v, p) in mesh.positions().iter().enumerate() {
        positions[perm[v]] = *p;
    }
    let triangles = mesh
        .triangles()
        .iter()
        .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
        .collect();
    TriMesh::new(positions, triangles).unwrap()
}

pub fn rotation(angles: [f64; 3]) -> [[f64; 3]; 3] {
    let (sa, ca) = angles[0].sin_cos();
    let (sb, cb) = angles[1].sin_cos();
    let (sc, cc) = angles[2].sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
    mul3(mul3(rz, ry), rx)
}

fn mul3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn rigid_motion(mesh: &TriMesh, angles: [f64; 3], shift: [f64; 3]) -> TriMesh {
    let r = rotation(angles);
    let positions = mesh
        .positions()
        .iter()
        .map(|p| {
            let mut q = shift;
            for i in 0..3 {
                for j in 0..3 {
                    q[i] += r[i][j] * p[j];
                }
            }
            q
        })
        .collect();
    mesh.with_positions(positions).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    perm
}

/// All-pairs edge-path distances by Floyd–Warshall.
/// All-pairs shortest edge paths in exact arithmetic, rounded once to `f64`.
/// Each length is scaled by the smallest power of two that makes every length
/// an integer; sums use checked `u128` arithmetic.
pub fn floyd_warshall(mesh: &TriMesh) -> Vec<Vec<f64>> {
    let n = mesh.vertex_count();
    let mut doublings = 0;
    for e in mesh.edges() {
        let (mut x, mut k) = (e.length, 0);
        while x.fract() != 0.0 {
            x *= 2.0;
            k += 1;
        }
        doublings = doublings.max(k);
    }
    let scale = 2f64.powi(doublings);
    let mut d = vec![vec![None::<u128>; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for e in mesh.edges() {
        let x = e.length * scale;
        assert!(
            x < 2f64.powi(120),
            "edge lengths span too many binades for the oracle"
        );
        d[e.a][e.b] = Some(x as u128);
        d[e.b][e.a] = Some(x as u128);
    }
    for k in 0..n {
        for i in 0..n {
            let Some(dik) = d[i][k] else { continue };
            for j in 0..n {
                let Some(dkj) = d[k][j] else { continue };
                let candidate = dik.checked_add(dkj).expect("oracle overflow");
                if d[i][j].is_none_or(|current| candidate < current) {
                    d[i][j] = Some(candidate);
                }
            }
        }
    }
    d.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| x.map_or(f64::INFINITY, |x| x as f64 / scale))
                .collect()
        })
        .collect()
}

/// Cyclic Jacobi eigen-decomposition of a dense symmetric matrix, ascending.
/// Slow and simple on purpose: it shares no code with the library solvers.
pub fn jacobi_eigen(mut a: Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = (0..n)
            .map(|i| a[(i, i)] * a[(i, i)])
            .sum::<f64>()
            .max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Lowest `k` pairs of `K x = λ A x` through the symmetric form `A^{-1/2} K A^{-1/2}`.
pub fn generalized_oracle(stiffness: &Matrix, mass: &MassMatrix, k: usize) -> (Vec<f64>, Matrix) {
    let n = stiffness.nrows();
    let d = mass.diagonal();
    let s = Matrix::from_fn(n, n, |i, j| stiffness[(i, j)] / (d[i] * d[j]).sqrt());
    let (values, vectors) = jacobi_eigen(s);
    let atoms = Matrix::from_fn(n, k, |i, j| vectors[(i, j)] / d[i].sqrt());
    (values[..k].to_vec(), atoms)
}

pub fn gram(atoms: &Matrix, mass: &MassMatrix) -> Matrix {
    let weighted = Matrix::from_fn(atoms.nrows(), atoms.ncols(), |i, j| {
        mass.diagonal()[i] * atoms[(i, j)]
    });
    atoms.transpose() * weighted
}

pub fn orthonormality_error(atoms: &Matrix, mass: &MassMatrix) -> f64 {
    let g = gram(atoms, mass);
    (g - Matrix::identity(atoms.ncols(), atoms.ncols())).amax()
}

/// Sine of the largest principal angle between two mass-orthonormal frames,
/// as the norm of the part of `a` outside the span of `b`.
pub fn subspace_gap(a: &Matrix, b: &Matrix, mass: &MassMatrix) -> f64 {
    let weighted = Matrix::from_fn(b.nrows(), b.ncols(), |i, j| mass.diagonal()[i] * b[(i, j)]);
    let residual = a - b * (weighted.transpose() * a);
    let scaled = Matrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        mass.diagonal()[i].sqrt() * residual[(i, j)]
    });
    scaled.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Random mass-orthonormal `n x k` frame.
pub fn random_frame(n: usize, k: usize, mass: &MassMatrix, rng: &mut impl Rng) -> Matrix {
    let x = Matrix::from_fn(n, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let weighted = Matrix::from_fn(n, k, |i, j| mass.diagonal()[i].sqrt() * x[(i, j)]);
    let q = weighted.qr().q();
    Matrix::from_fn(n, k, |i, j| q[(i, j)] / mass.diagonal()[i].sqrt())
}

/// Random orthogonal `k x k` matrix.
pub fn random_orthogonal(k: usize, rng: &mut impl Rng) -> Matrix {
    let x = Matrix::from_fn(k, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    x.qr().q()
}
