//! Edge-path geodesic distances and vertex sampling.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{norm, sub, TriMesh};
use crate::Matrix;

/// Single-source shortest-path distances over the weighted edge graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    distance: u128,
    vertex: usize,
}

impl Ord for Entry {
    // reversed so that `BinaryHeap` pops the closest vertex first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .distance
            .cmp(&self.distance)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `x = mantissa * 2^exponent` for finite non-negative `x`.
fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let fraction = bits & ((1 << 52) - 1);
    if biased == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1 << 52), biased - 1075)
    }
}

/// Edge lengths as integer multiples of `2^unit`. Path sums are then exact
/// and do not depend on summation order, so every distance is the correctly
/// rounded length of a shortest edge path. The unit is the smallest edge
/// ulp unless a path of `n` edges could overflow 128 bits, in which case the
/// shortest edges are rounded to the coarser unit.
struct FixedPoint {
    unit: i32,
}

impl FixedPoint {
    fn new(mesh: &TriMesh) -> Self {
        let (mut low, mut high) = (i32::MAX, i32::MIN);
        for e in mesh.edges() {
            let (m, exp) = decompose(e.length);
            if m != 0 {
                low = low.min(exp);
                high = high.max(exp + (64 - m.leading_zeros() as i32));
            }
        }
        if low == i32::MAX {
            return Self { unit: 0 };
        }
        let path_bits = (usize::BITS - mesh.vertex_count().leading_zeros()) as i32;
        Self {
            unit: low.max(high + path_bits - 127),
        }
    }

    fn length(&self, x: f64) -> u128 {
        let (m, exp) = decompose(x);
        let shift = exp - self.unit;
        if shift >= 0 {
            u128::from(m) << shift
        } else if shift > -64 {
            let half = 1u64 << (-shift - 1);
            u128::from((m >> -shift) + u64::from(m & ((half << 1) - 1) >= half))
        } else {
            0
        }
    }

    fn value(&self, d: u128) -> f64 {
        // `as` rounds to nearest, ties to even
        libm::scalbn(d as f64, self.unit)
    }
}

/// Dijkstra from `source`; vertices farther than `radius` are left at infinity.
pub fn geodesic_within(mesh: &TriMesh, source: usize, radius: f64) -> GeodesicField {
    let n = mesh.vertex_count();
    assert!(source < n, "source vertex {source} out of range");
    let fixed = FixedPoint::new(mesh);
    let mut best = vec![u128::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[source] = 0;
    heap.push(Entry {
        distance: 0,
        vertex: source,
    });
    while let Some(Entry { distance, vertex }) = heap.pop() {
        if done[vertex] {
            continue;
        }
        if fixed.value(distance) > radius {
            break;
        }
        done[vertex] = true;
        for (w, length) in mesh.neighbor_lengths(vertex) {
            let candidate = distance + fixed.length(length);
            if candidate < best[w] {
                best[w] = candidate;
                heap.push(Entry {
                    distance: candidate,
                    vertex: w,
                });
            }
        }
    }
    let distances = best
        .iter()
        .zip(&done)
        .map(|(&d, &finished)| {
            if finished {
                fixed.value(d)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    GeodesicField { source, distances }
}

pub fn geodesic_from(mesh: &TriMesh, source: usize) -> GeodesicField {
    geodesic_within(mesh, source, f64::INFINITY)
}

/// Distances from each source, one column per source (`n x sources.len()`).
pub fn distance_block(mesh: &TriMesh, sources: &[usize]) -> Matrix {
    let n = mesh.vertex_count();
    let mut block = Matrix::zeros(n, sources.len());
    for (j, &s) in sources.iter().enumerate() {
        let field = geodesic_from(mesh, s);
        block.column_mut(j).copy_from_slice(&field.distances);
    }
    block
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    FpsEuclidean,
    FpsGeodesic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpsMetric {
    Euclidean,
    Geodesic,
}

/// Distinct vertex indices, in selection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    indices: Vec<usize>,
    method: SamplingMethod,
}

impl SampleSet {
    pub fn new(indices: Vec<usize>, method: SamplingMethod, vertex_count: usize) -> Result<Self> {
        let mut seen = vec![false; vertex_count];
        for &i in &indices {
            if i >= vertex_count {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} out of range for {vertex_count} vertices"
                )));
            }
            if core::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("sample {i} repeated")));
            }
        }
        Ok(Self { indices, method })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The first `q` samples; an FPS prefix is itself an FPS sample set.
    pub fn prefix(&self, q: usize) -> Self {
        Self {
            indices: self.indices[..q.min(self.len())].to_vec(),
            method: self.method,
        }
    }
}

fn check_count(q: usize, n: usize) -> Result<()> {
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {q} samples from {n} vertices"
        )));
    }
    Ok(())
}

/// Greedy max-min sampling starting at `seed_vertex`; ties go to the lowest index.
pub fn farthest_point_sampling(
    mesh: &TriMesh,
    q: usize,
    metric: FpsMetric,
    seed_vertex: usize,
) -> Result<SampleSet> {
    let n = mesh.vertex_count();
    check_count(q, n)?;
    if seed_vertex >= n {
        return Err(Error::InvalidArgument(format!(
            "seed vertex {seed_vertex} out of range"
        )));
    }
    let positions = mesh.positions();
    let distances_from = |v: usize| -> Vec<f64> {
        match metric {
            FpsMetric::Euclidean => positions
                .iter()
                .map(|p| norm(sub(*p, positions[v])))
                .collect(),
            FpsMetric::Geodesic => geodesic_from(mesh, v).distances,
        }
    };
    let mut indices = Vec::with_capacity(q);
    let mut nearest = vec![f64::INFINITY; n];
    let mut current = seed_vertex;
    loop {
        indices.push(current);
        nearest[current] = -1.0;
        if indices.len() == q {
            break;
        }
        for (slot, d) in nearest.iter_mut().zip(distances_from(current)) {
            if *slot >= 0.0 && d < *slot {
                *slot = d;
            }
        }
        let mut best = usize::MAX;
        let mut best_distance = -1.0;
        for (v, &d) in nearest.iter().enumerate() {
            if d > best_distance {
                best = v;
                best_distance = d;
            }
        }
        current = best;
    }
    let method = match metric {
        FpsMetric::Euclidean => SamplingMethod::FpsEuclidean,
        FpsMetric::Geodesic => SamplingMethod::FpsGeodesic,
    };
    Ok(SampleSet { indices, method })
}

/// `q` distinct vertices drawn uniformly without replacement.
pub fn random_sampling(mesh: &TriMesh, q: usize, rng_seed: u64) -> Result<SampleSet> {
    let n = mesh.vertex_count();
    check_count(q, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let indices = rand::seq::index::sample(&mut rng, n, q).into_vec();
    Ok(SampleSet {
        indices,
        method: SamplingMethod::Random,
    })
}

/// Largest distance from any vertex to its nearest sample.
pub fn coverage_radius(mesh: &TriMesh, samples: &SampleSet) -> f64 {
    let mut nearest = vec![f64::INFINITY; mesh.vertex_count()];
    for &s in samples.indices() {
        for (slot, d) in nearest.iter_mut().zip(geodesic_from(mesh, s).distances) {
            *slot = slot.min(d);
        }
    }
    nearest.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn strip(len: usize) -> TriMesh {
        shapes::grid(len + 1, 2, len as f64, 0.01)
    }

    #[test]
    fn self_distance_is_zero_and_strip_sums_edges() {
        let mesh = strip(10);
        let field = geodesic_from(&mesh, 0);
        assert_eq!(field.distances[0], 0.0);
        // bottom row vertices are 0..=10 along x with unit spacing
        assert!((field.distances[10] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn edge_lipschitz_bound() {
        let mesh = shapes::icosphere(2);
        let field = geodesic_from(&mesh, 5);
        for e in mesh.edges() {
            assert!((field.distances[e.a] - field.distances[e.b]).abs() <= e.length + 1e-9);
        }
    }

    #[test]
    fn radius_limits_the_search() {
        let mesh = shapes::icosphere(2);
        let full = geodesic_from(&mesh, 0);
        let local = geodesic_within(&mesh, 0, 0.5);
        for (a, b) in full.distances.iter().zip(&local.distances) {
            if *a <= 0.5 {
                assert_eq!(a, b);
            } else {
                assert!(b.is_infinite());
            }
        }
    }

    #[test]
    fn fps_base_cases() {
        let mesh = strip(8);
        let one = farthest_point_sampling(&mesh, 1, FpsMetric::Euclidean, 3).unwrap();
        assert_eq!(one.indices(), &[3]);
        let all =
            farthest_point_sampling(&mesh, mesh.vertex_count(), FpsMetric::Geodesic, 0).unwrap();
        let mut sorted = all.indices().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..mesh.vertex_count()).collect::<Vec<_>>());
    }

    #[test]
    fn fps_second_sample_is_the_far_end() {
        let mesh = shapes::grid(11, 2, 1.0, 0.001);
        let set = farthest_point_sampling(&mesh, 2, FpsMetric::Euclidean, 0).unwrap();
        let p = mesh.positions()[set.indices()[1]];
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fps_ties_go_to_lowest_index() {
        // the two far corners of a square are equidistant from the centre
        let mesh = shapes::grid(3, 3, 1.0, 1.0);
        let set = farthest_point_sampling(&mesh, 2, FpsMetric::Euclidean, 4).unwrap();
        assert_eq!(set.indices()[1], 0);
    }

    #[test]
    fn random_sampling_is_reproducible_and_exhaustive() {
        let mesh = shapes::icosphere(1);
        let a = random_sampling(&mesh, 10, 7).unwrap();
        let b = random_sampling(&mesh, 10, 7).unwrap();
        assert_eq!(a, b);
        let all = random_sampling(&mesh, mesh.vertex_count(), 1).unwrap();
        let mut sorted = all.indices().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..mesh.vertex_count()).collect::<Vec<_>>());
    }

    #[test]
    fn random_inclusion_frequency_is_binomial() {
        let mesh = shapes::grid(70, 70, 1.0, 1.0);
        let n = mesh.vertex_count();
        let (q, runs) = (500, 100);
        let mut counts = vec![0u32; n];
        for seed in 0..runs {
            for &i in random_sampling(&mesh, q, seed).unwrap().indices() {
                counts[i] += 1;
            }
        }
        let p = q as f64 / n as f64;
        let mean = runs as f64 * p;
        let sd = (runs as f64 * p * (1.0 - p)).sqrt();
        // per vertex a 3 sigma band fails ~0.3% of the time; test the aggregate instead
        let outside = counts
            .iter()
            .filter(|&&c| (c as f64 - mean).abs() > 3.0 * sd)
            .count();
        assert!(
            (outside as f64) < 0.01 * n as f64,
            "{outside} of {n} outside 3 sigma"
        );
        let total: u32 = counts.iter().sum();
        assert_eq!(total as usize, q * runs as usize);
    }

    #[test]
    fn invalid_sample_sets_are_rejected() {
        assert!(SampleSet::new(vec![0, 0], SamplingMethod::Random, 3).is_err());
        assert!(SampleSet::new(vec![3], SamplingMethod::Random, 3).is_err());
    }
}
