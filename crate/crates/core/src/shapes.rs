//! Procedural test meshes.
//!
//! These are the bundled assets: every test and the acceptance suite run on
//! meshes generated here, so nothing has to be downloaded. The limbed figure
//! is a body with thin extruded limbs; [`LimbedFigure::pose`] bends the limbs
//! at shoulder and elbow joints, which gives near-isometric pairs with a
//! known identity correspondence.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::mesh::{cross, dot, norm, sub, TriMesh};

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    scale3(a, 1.0 / norm(a))
}

/// Rotates `p` about the unit `axis` by `angle` (Rodrigues).
fn rotate(p: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let k_cross = cross(axis, p);
    let k_dot = dot(axis, p);
    [
        p[0] * c + k_cross[0] * s + axis[0] * k_dot * (1.0 - c),
        p[1] * c + k_cross[1] * s + axis[1] * k_dot * (1.0 - c),
        p[2] * c + k_cross[2] * s + axis[2] * k_dot * (1.0 - c),
    ]
}

/// Any unit vector orthogonal to the unit vector `a`.
fn orthogonal(a: [f64; 3]) -> [f64; 3] {
    let helper = if a[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    normalized(cross(a, helper))
}

fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Regular tetrahedron with the given edge length.
pub fn tetrahedron(edge: f64) -> TriMesh {
    let s = edge / (2.0 * 2f64.sqrt());
    let positions = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::new(positions, triangles).expect("tetrahedron is valid")
}

/// Unit-radius icosphere after `subdivisions` rounds of 4-to-1 splitting.
///
/// Level 4 has 2562 vertices.
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| normalized(p))
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, positions: &mut Vec<[f64; 3]>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoints.entry(key).or_insert_with(|| {
                positions.push(normalized(scale3(add3(positions[a], positions[b]), 0.5)));
                positions.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    TriMesh::new(positions, triangles).expect("icosphere is valid")
}

/// Flat rectangular grid `[0, width] x [0, height]` in the z = 0 plane with
/// `nx * ny` vertices, row-major (`x` fastest).
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> TriMesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            positions.push([
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = j * nx + i;
            // Alternate the diagonal so the grid has no preferred direction.
            if (i + j) % 2 == 0 {
                triangles.push([v, v + 1, v + nx + 1]);
                triangles.push([v, v + nx + 1, v + nx]);
            } else {
                triangles.push([v, v + 1, v + nx]);
                triangles.push([v + 1, v + nx + 1, v + nx]);
            }
        }
    }
    TriMesh::new(positions, triangles).expect("grid is valid")
}

/// Rolls a flat mesh lying in z = 0 around a cylinder of the given radius,
/// along the x axis. Lengths measured along the surface are preserved.
pub fn bend_plane(flat: &TriMesh, radius: f64) -> TriMesh {
    let positions = flat
        .positions()
        .iter()
        .map(|p| {
            let angle = p[0] / radius;
            [
                radius * angle.sin(),
                p[1],
                radius * (1.0 - angle.cos()) + p[2],
            ]
        })
        .collect();
    flat.with_positions(positions)
        .expect("bending keeps connectivity")
}

/// Mutable triangle soup used while extruding limbs; compacted into a
/// [`TriMesh`] at the end.
struct Builder {
    positions: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    removed: Vec<bool>,
}

/// Geometry of one extruded limb in the rest shape.
#[derive(Debug, Clone)]
pub struct Limb {
    /// Center of the attachment loop.
    pub root: [f64; 3],
    /// Unit direction of the limb.
    pub axis: [f64; 3],
    pub length: f64,
    /// Vertices belonging to the extruded tube (final indices).
    pub vertices: Vec<usize>,
}

impl Builder {
    fn from_mesh(mesh: &TriMesh) -> Self {
        Self {
            positions: mesh.positions().to_vec(),
            triangles: mesh.triangles().to_vec(),
            removed: vec![false; mesh.vertex_count()],
        }
    }

    fn nearest_vertex(&self, target: [f64; 3]) -> usize {
        (0..self.positions.len())
            .filter(|&v| !self.removed[v])
            .min_by(|&a, &b| {
                let da = norm(sub(self.positions[a], target));
                let db = norm(sub(self.positions[b], target));
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .unwrap()
    }

    /// Replaces the one-ring disc around the surface vertex nearest to
    /// `anchor` with a capped tube pointing along `direction`.
    ///
    /// Returns the indices of all vertices created for the tube plus the
    /// attachment loop.
    fn extrude(
        &mut self,
        anchor: [f64; 3],
        direction: [f64; 3],
        length: f64,
        radius: f64,
        segments: usize,
    ) -> Limb {
        let center = self.nearest_vertex(anchor);
        // Directed boundary of the removed fan, taken from the surviving triangles.
        let fan: Vec<usize> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&center))
            .map(|(i, _)| i)
            .collect();
        let mut next_of: BTreeMap<usize, usize> = BTreeMap::new();
        for &ti in &fan {
            let t = self.triangles[ti];
            let k = t.iter().position(|&v| v == center).unwrap();
            // In triangle (center, a, b) the surviving neighbor holds b -> a.
            let a = t[(k + 1) % 3];
            let b = t[(k + 2) % 3];
            next_of.insert(b, a);
        }
        let start = *next_of.keys().next().unwrap();
        let mut ring = vec![start];
        let mut cur = next_of[&start];
        while cur != start {
            ring.push(cur);
            cur = next_of[&cur];
        }
        let mut fan_sorted = fan;
        fan_sorted.sort_unstable_by(|a, b| b.cmp(a));
        for ti in fan_sorted {
            self.triangles.swap_remove(ti);
        }
        self.removed[center] = true;

        let axis = normalized(direction);
        let m = ring.len();
        let root = scale3(
            ring.iter()
                .fold([0.0; 3], |acc, &v| add3(acc, self.positions[v])),
            1.0 / m as f64,
        );
        let offsets: Vec<[f64; 3]> = ring
            .iter()
            .map(|&v| {
                let d = sub(self.positions[v], root);
                normalized(sub(d, scale3(axis, dot(d, axis))))
            })
            .collect();

        let mut limb_vertices = ring.clone();
        let mut previous = ring;
        let step = length / segments as f64;
        for s in 1..=segments {
            let along = step * s as f64;
            // Slight taper keeps the tip thinner than the root.
            let r = radius * (1.0 - 0.25 * along / length);
            let base = add3(root, scale3(axis, along));
            let current: Vec<usize> = offsets
                .iter()
                .map(|o| {
                    self.positions.push(add3(base, scale3(*o, r)));
                    self.removed.push(false);
                    self.positions.len() - 1
                })
                .collect();
            for i in 0..m {
                let (u, v) = (previous[i], previous[(i + 1) % m]);
                let (u2, v2) = (current[i], current[(i + 1) % m]);
                // Boundary edge u -> v is used by the body; the tube walks v -> u.
                self.triangles.push([v, u, u2]);
                self.triangles.push([v, u2, v2]);
            }
            limb_vertices.extend_from_slice(&current);
            previous = current;
        }
        let tip_radius = radius * 0.75;
        let tip = add3(root, scale3(axis, length + 0.6 * tip_radius));
        let cap_ring: Vec<usize> = offsets
            .iter()
            .map(|o| {
                let base = add3(root, scale3(axis, length + 0.4 * tip_radius));
                self.positions
                    .push(add3(base, scale3(*o, 0.6 * tip_radius)));
                self.removed.push(false);
                self.positions.len() - 1
            })
            .collect();
        for i in 0..m {
            let (u, v) = (previous[i], previous[(i + 1) % m]);
            let (u2, v2) = (cap_ring[i], cap_ring[(i + 1) % m]);
            self.triangles.push([v, u, u2]);
            self.triangles.push([v, u2, v2]);
        }
        limb_vertices.extend_from_slice(&cap_ring);
        self.positions.push(tip);
        self.removed.push(false);
        let tip_index = self.positions.len() - 1;
        for i in 0..m {
            let (u, v) = (cap_ring[i], cap_ring[(i + 1) % m]);
            self.triangles.push([v, u, tip_index]);
        }
        limb_vertices.push(tip_index);
        Limb {
            root,
            axis,
            length,
            vertices: limb_vertices,
        }
    }

    fn finish(self, limbs: &mut [Limb]) -> TriMesh {
        let mut remap = vec![usize::MAX; self.positions.len()];
        let mut positions = Vec::new();
        for (v, p) in self.positions.iter().enumerate() {
            if !self.removed[v] {
                remap[v] = positions.len();
                positions.push(*p);
            }
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
            .collect();
        for limb in limbs.iter_mut() {
            for v in limb.vertices.iter_mut() {
                *v = remap[*v];
            }
        }
        TriMesh::new(positions, triangles).expect("extruded mesh is valid")
    }
}

/// Closed capsule-like tube along the z axis with a handful of short, thin
/// bumps extruded from its side.
pub fn tube_with_protrusions(subdivisions: usize) -> TriMesh {
    let sphere = icosphere(subdivisions);
    let stretched: Vec<[f64; 3]> = sphere
        .positions()
        .iter()
        .map(|p| [0.45 * p[0], 0.45 * p[1], 1.6 * p[2]])
        .collect();
    let base = sphere.with_positions(stretched).unwrap();
    let mut builder = Builder::from_mesh(&base);
    let mut limbs = Vec::new();
    for (i, z) in [-0.9, -0.3, 0.3, 0.9].iter().enumerate() {
        let angle = i as f64 * PI / 2.0;
        let dir = [angle.cos(), angle.sin(), 0.0];
        let anchor = [0.45 * dir[0], 0.45 * dir[1], *z];
        limbs.push(builder.extrude(anchor, dir, 0.5, 0.07, 6));
    }
    builder.finish(&mut limbs)
}

/// A body with thin limbs, plus the limb frames needed to pose it.
#[derive(Debug, Clone)]
pub struct LimbedFigure {
    pub mesh: TriMesh,
    pub limbs: Vec<Limb>,
}

/// Joint angles for one limb: a bend near the root, one past mid-length,
/// and a twist about the limb axis.
#[derive(Debug, Clone, Copy, Default)]
pub struct LimbPose {
    pub shoulder: f64,
    pub elbow: f64,
    /// Rotation of the bending plane about the limb axis.
    pub plane: f64,
    /// Rotation about the limb axis at the tip, ramping up from zero at the root.
    pub twist: f64,
}

impl LimbedFigure {
    /// Body (an elongated icosphere) with five long thin limbs: two arms,
    /// two legs and a neck-like head stalk, plus a short thin tail.
    pub fn new(subdivisions: usize, segments: usize) -> Self {
        let sphere = icosphere(subdivisions);
        let body: Vec<[f64; 3]> = sphere
            .positions()
            .iter()
            .map(|p| [0.55 * p[0], 1.0 * p[1], 0.4 * p[2]])
            .collect();
        let base = sphere.with_positions(body).unwrap();
        let mut builder = Builder::from_mesh(&base);
        let specs: [([f64; 3], [f64; 3], f64, f64, usize); 6] = [
            // anchor, direction, length, radius, segment fraction
            ([0.45, 0.55, 0.0], [1.0, 0.35, 0.0], 1.5, 0.09, segments),
            ([-0.45, 0.55, 0.0], [-1.0, 0.35, 0.0], 1.5, 0.09, segments),
            ([0.3, -0.9, 0.0], [0.25, -1.0, 0.0], 1.7, 0.11, segments),
            ([-0.3, -0.9, 0.0], [-0.25, -1.0, 0.0], 1.7, 0.11, segments),
            ([0.0, 1.0, 0.0], [0.0, 1.0, 0.0], 0.6, 0.13, segments / 2),
            (
                [0.0, -0.3, -0.4],
                [0.0, -0.4, -1.0],
                0.9,
                0.05,
                segments / 2,
            ),
        ];
        let mut limbs: Vec<Limb> = specs
            .iter()
            .map(|&(anchor, dir, length, radius, segs)| {
                builder.extrude(anchor, dir, length, radius, segs.max(2))
            })
            .collect();
        let mesh = builder.finish(&mut limbs);
        Self { mesh, limbs }
    }

    /// Bends every limb according to `poses` (missing entries stay straight).
    ///
    /// Each joint rotates the part of the limb beyond it about an axis
    /// orthogonal to the limb, blended over a short window so the tube bends
    /// smoothly instead of folding.
    pub fn pose(&self, poses: &[LimbPose]) -> TriMesh {
        let mut positions = self.mesh.positions().to_vec();
        for (limb, pose) in self.limbs.iter().zip(poses) {
            let bend_axis = rotate(orthogonal(limb.axis), limb.axis, pose.plane);
            let joints = [
                (0.2 * limb.length, pose.shoulder),
                (0.6 * limb.length, pose.elbow),
            ];
            let window = 0.3 * limb.length;
            for &v in &limb.vertices {
                let rest = self.mesh.positions()[v];
                let along = dot(sub(rest, limb.root), limb.axis);
                let mut p = rest;
                if pose.twist != 0.0 {
                    let weight = smoothstep(along / limb.length);
                    p = add3(
                        limb.root,
                        rotate(sub(p, limb.root), limb.axis, weight * pose.twist),
                    );
                }
                // Apply the distal joint first so the proximal one carries it along.
                for &(at, angle) in joints.iter().rev() {
                    let weight = smoothstep((along - at + window / 2.0) / window);
                    if weight == 0.0 || angle == 0.0 {
                        continue;
                    }
                    let pivot = add3(limb.root, scale3(limb.axis, at));
                    p = add3(pivot, rotate(sub(p, pivot), bend_axis, weight * angle));
                }
                positions[v] = p;
            }
        }
        self.mesh
            .with_positions(positions)
            .expect("posing keeps connectivity")
    }
}
