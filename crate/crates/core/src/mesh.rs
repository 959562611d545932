//! Triangle meshes and their lumped area weights.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Fraction of the total area below which a triangle counts as degenerate.
pub const DEGENERATE_AREA_TOLERANCE: f64 = 1e-12;

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn triangle_area(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> f64 {
    0.5 * norm(cross(sub(q, p), sub(r, p)))
}

/// An undirected mesh edge, stored once with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// A connected triangle mesh with derived edge adjacency.
///
/// Construction validates the topology, so every `TriMesh` in circulation has
/// in-range, non-degenerate triangles and a single connected component.
#[derive(Debug, Clone)]
pub struct TriMesh {
    positions: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    // CSR adjacency: neighbors of v are neighbors[offsets[v]..offsets[v + 1]], sorted.
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    neighbor_edge: Vec<usize>,
}

impl TriMesh {
    pub fn new(positions: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        if n == 0 || triangles.is_empty() {
            return Err(Error::Topology(
                "mesh has no vertices or no triangles".into(),
            ));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(Error::Topology(format!(
                    "triangle {t} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex")));
            }
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Topology("non-finite vertex coordinate".into()));
        }

        let areas: Vec<f64> = triangles
            .iter()
            .map(|t| triangle_area(positions[t[0]], positions[t[1]], positions[t[2]]))
            .collect();
        let total: f64 = areas.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Topology("mesh has zero total area".into()));
        }
        if let Some(t) = areas
            .iter()
            .position(|&a| a <= DEGENERATE_AREA_TOLERANCE * total)
        {
            return Err(Error::Topology(format!("triangle {t} is degenerate")));
        }

        let mut pairs: Vec<(usize, usize)> = triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(a, b)| Edge {
                a,
                b,
                length: norm(sub(positions[a], positions[b])),
            })
            .collect();

        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut neighbor_edge = vec![0usize; offsets[n]];
        for (id, e) in edges.iter().enumerate() {
            neighbors[fill[e.a]] = e.b;
            neighbor_edge[fill[e.a]] = id;
            fill[e.a] += 1;
            neighbors[fill[e.b]] = e.a;
            neighbor_edge[fill[e.b]] = id;
            fill[e.b] += 1;
        }
        for v in 0..n {
            let range = offsets[v]..offsets[v + 1];
            let mut row: Vec<(usize, usize)> = neighbors[range.clone()]
                .iter()
                .copied()
                .zip(neighbor_edge[range.clone()].iter().copied())
                .collect();
            row.sort_unstable();
            for (slot, (nb, id)) in range.zip(row) {
                neighbors[slot] = nb;
                neighbor_edge[slot] = id;
            }
        }

        let mesh = Self {
            positions,
            triangles,
            edges,
            offsets,
            neighbors,
            neighbor_edge,
        };
        if degree.iter().any(|&d| d == 0) {
            return Err(Error::Topology("mesh has isolated vertices".into()));
        }
        let components = mesh.component_count();
        if components != 1 {
            return Err(Error::Topology(format!(
                "mesh has {components} connected components"
            )));
        }
        Ok(mesh)
    }

    fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted neighbor vertices of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Neighbors of `v` paired with the connecting edge length.
    pub fn neighbor_lengths(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.neighbors[range.clone()]
            .iter()
            .zip(&self.neighbor_edge[range])
            .map(move |(&w, &e)| (w, self.edges[e].length))
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let range = self.offsets[a]..self.offsets[a + 1];
        self.neighbors[range.clone()]
            .binary_search(&b)
            .ok()
            .map(|i| self.neighbor_edge[range.start + i])
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| {
                triangle_area(
                    self.positions[t[0]],
                    self.positions[t[1]],
                    self.positions[t[2]],
                )
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.triangle_areas().iter().sum()
    }

    /// Copy of the mesh with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
            .collect();
        Self::new(positions, self.triangles.clone())
    }

    /// Copy of the mesh with new vertex positions and the same connectivity.
    pub fn with_positions(&self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: self.vertex_count(),
                found: positions.len(),
            });
        }
        Self::new(positions, self.triangles.clone())
    }
}

/// Diagonal (lumped) mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    diagonal: Vec<f64>,
    total_area: f64,
}

impl MassMatrix {
    /// Wraps explicit per-vertex weights; all must be positive.
    pub fn from_diagonal(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::EmptyInput("mass diagonal"));
        }
        if let Some(i) = diagonal.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mass entry {i} is not strictly positive"
            )));
        }
        let total_area = diagonal.iter().sum();
        Ok(Self {
            diagonal,
            total_area,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// Area-weighted inner product `fᵀ A g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.diagonal
            .iter()
            .zip(f.iter().zip(g))
            .map(|(a, (x, y))| a * x * y)
            .sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }
}

/// One-third rule: each vertex receives a third of every incident triangle's area.
pub fn lumped_mass(mesh: &TriMesh) -> MassMatrix {
    let mut diagonal = vec![0.0; mesh.vertex_count()];
    let areas = mesh.triangle_areas();
    for (t, area) in mesh.triangles().iter().zip(&areas) {
        for &v in t {
            diagonal[v] += area / 3.0;
        }
    }
    MassMatrix {
        diagonal,
        total_area: areas.iter().sum(),
    }
}

/// Uniformly rescales coordinates (about the origin) so the surface has unit area.
pub fn normalize_to_unit_area(mesh: &TriMesh) -> TriMesh {
    let factor = 1.0 / mesh.total_area().sqrt();
    let positions = mesh
        .positions()
        .iter()
        .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
        .collect();
    // Uniform scaling keeps every area ratio, so the validated topology still holds.
    TriMesh {
        positions,
        triangles: mesh.triangles.clone(),
        edges: mesh
            .edges
            .iter()
            .map(|e| Edge {
                length: e.length * factor,
                ..*e
            })
            .collect(),
        offsets: mesh.offsets.clone(),
        neighbors: mesh.neighbors.clone(),
        neighbor_edge: mesh.neighbor_edge.clone(),
    }
}
