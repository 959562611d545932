//! Correspondence errors and embedding-quality measures.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fmap::{GroundTruth, PointwiseMap};
use crate::geodesic::geodesic_from;
use crate::mesh::TriMesh;
use crate::Matrix;

pub const DEFAULT_EGDC_NEIGHBORS: usize = 80;
pub const DEFAULT_MGD_NEIGHBORS: usize = 10;

/// Geodesic distance between two vertices; the search stops once `b` is settled.
pub fn geodesic_distance(mesh: &TriMesh, a: usize, b: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .0
                .total_cmp(&self.0)
                .then_with(|| other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    let mut distances = vec![f64::INFINITY; mesh.vertex_count()];
    let mut heap = BinaryHeap::new();
    distances[a] = 0.0;
    heap.push(Item(0.0, a));
    while let Some(Item(d, v)) = heap.pop() {
        if v == b {
            return d;
        }
        if d > distances[v] {
            continue;
        }
        for (w, length) in mesh.neighbor_lengths(v) {
            let candidate = d + length;
            if candidate < distances[w] {
                distances[w] = candidate;
                heap.push(Item(candidate, w));
            }
        }
    }
    f64::INFINITY
}

/// `geo_M(T̄(y), T(y))` for every vertex `y` covered by the ground truth, in
/// ground-truth order.
pub fn geodesic_error(pred: &PointwiseMap, gt: &GroundTruth, mesh_m: &TriMesh) -> Result<Vec<f64>> {
    if pred.target_count() != mesh_m.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh_m.vertex_count(),
            found: pred.target_count(),
        });
    }
    gt.pairs()
        .iter()
        .map(|&(y, x)| {
            let predicted = *pred.assignment().get(y).ok_or_else(|| {
                Error::InvalidArgument(format!("ground truth vertex {y} not in the map"))
            })?;
            if x >= mesh_m.vertex_count() {
                return Err(Error::InvalidArgument(format!(
                    "ground truth target {x} out of range"
                )));
            }
            Ok(geodesic_distance(mesh_m, predicted, x))
        })
        .collect()
}

/// Mean of the per-vertex errors.
pub fn age(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("errors"));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// `(AGE_ours − AGE_lb) / AGE_lb`.
pub fn relative_error(age_ours: f64, age_lb: f64) -> Result<f64> {
    if age_lb == 0.0 {
        return Err(Error::DivisionByZero("baseline AGE"));
    }
    Ok((age_ours - age_lb) / age_lb)
}

/// Mean of per-pair relative errors.
pub fn mean_relative_error(relative_errors: &[f64]) -> Result<f64> {
    age(relative_errors).map_err(|_| Error::EmptyInput("relative errors"))
}

/// Fraction of errors at or below each threshold.
pub fn cumulative_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("errors"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "thresholds must be ascending".into(),
        ));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&e| e <= t) as f64 / n))
        .collect())
}

/// Per-vertex error summary of one map.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_vertex_error: Vec<f64>,
    pub age: f64,
    pub cumulative_curve: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn new(per_vertex_error: Vec<f64>, thresholds: &[f64]) -> Result<Self> {
        Ok(Self {
            age: age(&per_vertex_error)?,
            cumulative_curve: cumulative_curve(&per_vertex_error, thresholds)?,
            per_vertex_error,
        })
    }
}

/// `count + 1` evenly spaced thresholds from 0 to `max`.
pub fn threshold_grid(max: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| max * i as f64 / count.max(1) as f64)
        .collect()
}

/// Discrimination power, EGDC and MGD for every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMetrics {
    pub discr: Vec<f64>,
    pub egdc: Vec<f64>,
    /// Vertices whose EGDC neighbourhood had zero variance (reported as 0).
    pub egdc_degenerate: Vec<bool>,
    pub mgd: Vec<f64>,
}

impl EmbeddingMetrics {
    pub fn mean_egdc(&self) -> f64 {
        mean(&self.egdc)
    }

    pub fn mean_mgd(&self) -> f64 {
        mean(&self.mgd)
    }

    pub fn mean_discr(&self) -> f64 {
        mean(&self.discr)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// The `count` indices with the smallest `values`, excluding `skip`; ties go
/// to the lower index. Returned nearest first.
fn smallest(values: &[f64], skip: usize, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| i != skip).collect();
    let key = |a: &usize, b: &usize| values[*a].total_cmp(&values[*b]).then(a.cmp(b));
    if count < order.len() {
        order.select_nth_unstable_by(count, key);
        order.truncate(count);
    }
    order.sort_by(key);
    order
}

/// Per-vertex embedding metrics for the embedding given by the rows of
/// `embedding` (`n x k`), with `s` EGDC neighbours and `t` MGD neighbours.
pub fn embedding_metrics(
    embedding: &Matrix,
    mesh: &TriMesh,
    s: usize,
    t: usize,
) -> Result<EmbeddingMetrics> {
    let n = mesh.vertex_count();
    if embedding.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: embedding.nrows(),
        });
    }
    if s == 0 || s >= n || t == 0 || t >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbourhood sizes s = {s}, t = {t} must lie in 1..{n}"
        )));
    }
    let k = embedding.ncols();
    let rows: Vec<f64> = embedding.transpose().as_slice().to_vec();
    let row = |i: usize| &rows[i * k..(i + 1) * k];
    let mut out = EmbeddingMetrics {
        discr: vec![0.0; n],
        egdc: vec![0.0; n],
        egdc_degenerate: vec![false; n],
        mgd: vec![0.0; n],
    };
    let mut embedded = vec![0.0; n];
    for x in 0..n {
        let ex = row(x);
        for (y, slot) in embedded.iter_mut().enumerate() {
            *slot = ex
                .iter()
                .zip(row(y))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
        let geo = geodesic_from(mesh, x).distances;

        let near = smallest(&embedded, x, s.max(t));
        let nearest = near[0];
        out.discr[x] = embedded[nearest] / geo[nearest];

        let e: Vec<f64> = near[..s].iter().map(|&y| embedded[y]).collect();
        let g: Vec<f64> = near[..s].iter().map(|&y| geo[y]).collect();
        match pearson(&e, &g) {
            Some(r) => out.egdc[x] = r,
            None => out.egdc_degenerate[x] = true,
        }

        let by_embedding: f64 = near[..t].iter().map(|&y| geo[y]).sum();
        let by_geodesic: f64 = smallest(&geo, x, t).iter().map(|&y| geo[y]).sum();
        out.mgd[x] = by_embedding / by_geodesic;
    }
    Ok(out)
}

/// `‖emb(x) − emb(y_x)‖ / geo(x, y_x)` with `y_x` the embedding-nearest other vertex.
pub fn discrimination_power(embedding: &Matrix, mesh: &TriMesh) -> Result<Vec<f64>> {
    Ok(embedding_metrics(embedding, mesh, 1, 1)?.discr)
}

/// Pearson correlation of embedding and geodesic distances over the `s`
/// embedding-nearest vertices.
pub fn egdc(embedding: &Matrix, mesh: &TriMesh, s: usize) -> Result<Vec<f64>> {
    Ok(embedding_metrics(embedding, mesh, s, 1)?.egdc)
}

/// Mean geodesic distance of the `t` embedding-nearest vertices over that of
/// the `t` geodesically nearest ones.
pub fn mgd(embedding: &Matrix, mesh: &TriMesh, t: usize) -> Result<Vec<f64>> {
    Ok(embedding_metrics(embedding, mesh, 1, t)?.mgd)
}
