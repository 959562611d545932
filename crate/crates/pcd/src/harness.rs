//! Experiment runner: bases per mesh, pipelines per pair, comparisons and
//! parameter sweeps.
//!
//! Meshes, bases and pairs are processed in a rayon pool. Every unit of work
//! is isolated: an error or panic is recorded against its mesh or pair and
//! the run carries on. Results are collected in input order, so reports do not
//! depend on scheduling.

use std::panic::{catch_unwind, AssertUnwindSafe};

use pcd_core::dictionary::{
    adaptive_gaussian_dictionary, concat_dictionaries, gaussian_dictionary, heat_dictionary,
    spec_dictionary, wave_dictionary, wks_dictionary, WksParams,
};
use pcd_core::fmap::{
    estimate_fmap_product_preservation, fmap_from_pointwise, pointwise_from_fmap, zoomout_refine,
    ProductPreservation, Shape,
};
use pcd_core::geodesic::{farthest_point_sampling, random_sampling, FpsMetric};
use pcd_core::metrics::{
    age, embedding_metrics, geodesic_error, mean_relative_error, relative_error, EmbeddingMetrics,
};
use pcd_core::pcd::{pcd_with, PcdOptions};
use pcd_core::spectral::{cotangent_laplacian, eigenbasis};
use pcd_core::{
    Basis, EigenBasis, FunctionalMap, Laplacian, Matrix, PointwiseMap, SampleSet, TriMesh,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BasisKind, BasisSpec, ExperimentConfig, Pipeline, Sampling};
use crate::dataset::{Dataset, Pair};

/// WKS scales kept as product-preservation descriptors: every fifth of 100.
pub const DESCRIPTOR_STRIDE: usize = 5;

/// Outcome of an isolated unit of work; failures carry a message.
pub type Outcome<T> = std::result::Result<T, String>;

/// Runs `f`, turning both errors and panics into a message.
pub fn isolate<T, E: std::fmt::Display>(f: impl FnOnce() -> Result<T, E>) -> Outcome<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(match panic.downcast_ref::<&str>() {
            Some(s) => format!("panic: {s}"),
            None => match panic.downcast_ref::<String>() {
                Some(s) => format!("panic: {s}"),
                None => "panic".into(),
            },
        }),
    }
}

/// Per-mesh operators shared by every basis.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub lap: Laplacian,
    /// Up to `max(k, spectral_k)` eigenpairs.
    pub lb: EigenBasis,
    /// Product-preservation descriptors; present when the pipeline needs them.
    pub descriptors: Option<Matrix>,
}

impl Prepared {
    pub fn new(mesh: &TriMesh, eigenpairs: usize, descriptors: bool) -> pcd_core::Result<Self> {
        let lap = cotangent_laplacian(mesh)?;
        let lb = eigenbasis(&lap, eigenpairs.min(mesh.vertex_count()))?;
        let descriptors = if descriptors {
            Some(wks_descriptors(&lb)?)
        } else {
            None
        };
        Ok(Self {
            lap,
            lb,
            descriptors,
        })
    }
}

/// Every [`DESCRIPTOR_STRIDE`]-th column of the default WKS.
pub fn wks_descriptors(lb: &EigenBasis) -> pcd_core::Result<Matrix> {
    let wks = wks_dictionary(lb, &WksParams::default())?;
    let keep: Vec<usize> = (0..wks.q()).step_by(DESCRIPTOR_STRIDE).collect();
    Ok(wks.atoms.select_columns(&keep))
}

/// Seed for random sampling on mesh `index`, decorrelated across meshes.
fn mesh_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn samples(mesh: &TriMesh, spec: &BasisSpec, seed: u64) -> pcd_core::Result<SampleSet> {
    let q = spec.q().min(mesh.vertex_count());
    match spec.sampling {
        Sampling::Fps => farthest_point_sampling(mesh, q, FpsMetric::Euclidean, 0),
        Sampling::Random => random_sampling(mesh, q, seed),
    }
}

/// LB truncated to `k`, or the `k` principal components of the spec's dictionary.
pub fn build_basis(
    mesh: &TriMesh,
    prep: &Prepared,
    spec: &BasisSpec,
    k: usize,
    seed: u64,
) -> pcd_core::Result<Basis> {
    let lb = &prep.lb;
    let dict = match spec.kind {
        BasisKind::Lb => return Ok(Basis::from(lb.truncated(k))),
        BasisKind::Wks => wks_dictionary(lb, &WksParams::default())?,
        kind => {
            let s = samples(mesh, spec, seed)?;
            match kind {
                BasisKind::Pcgau => gaussian_dictionary(mesh, &s, spec.sigma())?,
                BasisKind::Adapt => {
                    adaptive_gaussian_dictionary(mesh, &s, spec.sigma(), &lb.truncated(k))?
                }
                BasisKind::Heat => heat_dictionary(&s, lb, spec.t())?,
                BasisKind::Spec => spec_dictionary(&s, lb, spec.alpha())?,
                BasisKind::Wave => wave_dictionary(&s, lb, spec.t())?,
                BasisKind::Wksgau => concat_dictionaries(
                    &wks_dictionary(lb, &WksParams::default())?,
                    &gaussian_dictionary(mesh, &s, spec.sigma())?,
                )?,
                BasisKind::Lb | BasisKind::Wks => unreachable!(),
            }
        }
    };
    let options = PcdOptions {
        k,
        normalize: spec.normalize,
        rank_policy: spec.rank_policy(),
    };
    pcd_with(&dict, prep.lap.mass(), &options)
}

/// Map, functional map and evaluation of one pair under one basis.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub fmap: FunctionalMap,
    pub map: PointwiseMap,
    /// Per-vertex geodesic error on `M`; empty without ground truth.
    pub errors: Vec<f64>,
    pub age: Option<f64>,
}

/// Inputs of [`run_pair`] for one side of the pair.
#[derive(Debug, Clone, Copy)]
pub struct Side<'a> {
    pub mesh: &'a TriMesh,
    pub prep: &'a Prepared,
    pub basis: &'a Basis,
}

/// Runs the configured pipeline from `M` (`target`) to `N` (`source`).
pub fn run_pair(
    config: &ExperimentConfig,
    pair: &Pair,
    n: Side,
    m: Side,
) -> Result<PairRun, String> {
    let k = config.k;
    if n.basis.k() < k || m.basis.k() < k {
        return Err(format!(
            "bases hold {} and {} atoms, below k = {k}",
            n.basis.k(),
            m.basis.k()
        ));
    }
    let (nn, nm) = (n.mesh.vertex_count(), m.mesh.vertex_count());
    let fail = |e: pcd_core::Error| e.to_string();
    let (fmap, map) = match config.pipeline {
        Pipeline::Gt => {
            let gt = pair
                .dense_gt(nn, nm)
                .ok_or("the gt pipeline needs a ground-truth map covering every source vertex")?;
            let c = fmap_from_pointwise(&gt, m.basis, n.basis, n.prep.lap.mass()).map_err(fail)?;
            let map = pointwise_from_fmap(&c, m.basis, n.basis).map_err(fail)?;
            (c, map)
        }
        Pipeline::No17 | Pipeline::Zoomout => {
            let landmarks = pair
                .landmarks
                .as_ref()
                .ok_or("this pipeline needs landmarks")?;
            let k_est = if config.pipeline == Pipeline::Zoomout {
                config.k_ini
            } else {
                k
            };
            let (bm, bn) = (m.basis.truncated(k_est), n.basis.truncated(k_est));
            let missing = || "descriptors were not prepared".to_string();
            let shape_m = Shape {
                mesh: m.mesh,
                basis: &bm,
                mass: m.prep.lap.mass(),
                descriptors: m.prep.descriptors.as_ref().ok_or_else(missing)?,
            };
            let shape_n = Shape {
                mesh: n.mesh,
                basis: &bn,
                mass: n.prep.lap.mass(),
                descriptors: n.prep.descriptors.as_ref().ok_or_else(missing)?,
            };
            let c = estimate_fmap_product_preservation(
                &shape_m,
                &shape_n,
                landmarks,
                &ProductPreservation::default(),
            )
            .map_err(fail)?;
            if config.pipeline == Pipeline::Zoomout {
                let z = zoomout_refine(&c, m.basis, n.basis, n.prep.lap.mass(), k, config.step)
                    .map_err(fail)?;
                (z.fmap, z.map)
            } else {
                let map = pointwise_from_fmap(&c, &bm, &bn).map_err(fail)?;
                (c, map)
            }
        }
    };
    let (errors, age) = match &pair.gt {
        Some(gt) => {
            let errors = geodesic_error(&map, gt, m.mesh).map_err(fail)?;
            let a = age(&errors).map_err(fail)?;
            (errors, Some(a))
        }
        None => (Vec::new(), None),
    };
    Ok(PairRun {
        fmap,
        map,
        errors,
        age,
    })
}

/// Per-mesh state for one experiment.
pub struct Engine<'a> {
    pub config: &'a ExperimentConfig,
    pub data: &'a Dataset,
    pub prepared: Vec<Outcome<Prepared>>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a ExperimentConfig, data: &'a Dataset) -> Self {
        let eigenpairs = config.k.max(config.spectral_k);
        let descriptors = config.pipeline != Pipeline::Gt;
        let prepared = data
            .meshes
            .par_iter()
            .map(|m| isolate(|| Prepared::new(&m.mesh, eigenpairs, descriptors)))
            .collect();
        Self {
            config,
            data,
            prepared,
        }
    }

    /// The basis `spec` on every mesh.
    pub fn bases(&self, spec: &BasisSpec) -> Vec<Outcome<Basis>> {
        self.data
            .meshes
            .par_iter()
            .zip(&self.prepared)
            .enumerate()
            .map(|(i, (m, prep))| {
                let prep = prep.as_ref().map_err(|e| format!("mesh {}: {e}", m.name))?;
                isolate(|| {
                    build_basis(
                        &m.mesh,
                        prep,
                        spec,
                        self.config.k,
                        mesh_seed(self.config.seed, i),
                    )
                })
            })
            .collect()
    }

    /// Every pair under one basis per mesh.
    pub fn run_pairs(&self, bases: &[Outcome<Basis>]) -> Vec<Outcome<PairRun>> {
        self.data
            .pairs
            .par_iter()
            .map(|pair| {
                let side = |i: usize| -> Outcome<Side> {
                    let name = &self.data.meshes[i].name;
                    Ok(Side {
                        mesh: &self.data.meshes[i].mesh,
                        prep: self.prepared[i]
                            .as_ref()
                            .map_err(|e| format!("mesh {name}: {e}"))?,
                        basis: bases[i]
                            .as_ref()
                            .map_err(|e| format!("basis on {name}: {e}"))?,
                    })
                };
                let (n, m) = (side(pair.source)?, side(pair.target)?);
                isolate(|| run_pair(self.config, pair, n, m))
            })
            .collect()
    }

    /// Discrimination power, EGDC and MGD of each mesh's basis.
    pub fn embedding(&self, bases: &[Outcome<Basis>]) -> Vec<Outcome<EmbeddingMetrics>> {
        self.data
            .meshes
            .par_iter()
            .zip(bases)
            .map(|(m, basis)| {
                let basis = basis.as_ref().map_err(Clone::clone)?;
                isolate(|| {
                    embedding_metrics(
                        &basis.atoms,
                        &m.mesh,
                        self.config.egdc_neighbors,
                        self.config.mgd_neighbors,
                    )
                })
            })
            .collect()
    }
}

/// A unit of work that failed, for the error manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    /// `mesh`, `basis`, `pair` or `embedding`.
    pub stage: String,
    pub item: String,
    pub basis: Option<String>,
    pub error: String,
}

/// Mean EGDC, MGD and discrimination power of one basis on one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingSummary {
    pub discr: f64,
    pub egdc: f64,
    pub mgd: f64,
}

impl From<&EmbeddingMetrics> for EmbeddingSummary {
    fn from(e: &EmbeddingMetrics) -> Self {
        Self {
            discr: e.mean_discr(),
            egdc: e.mean_egdc(),
            mgd: e.mean_mgd(),
        }
    }
}

/// Per-basis aggregate of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSummary {
    pub label: String,
    pub completed: usize,
    pub mean_age: Option<f64>,
    /// Mean relative error against the baseline over pairs both completed.
    pub mre: Option<f64>,
    /// Pairs with strictly lower AGE than the baseline.
    pub wins: usize,
    pub mean_egdc: Option<f64>,
    pub mean_mgd: Option<f64>,
}

/// Table-style comparison: AGE per (pair, basis) and MRE against LB.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub pair_names: Vec<String>,
    pub mesh_names: Vec<String>,
    /// Index of the first LB basis, the MRE baseline.
    pub baseline: Option<usize>,
    /// `[pair][basis]`.
    pub runs: Vec<Vec<Outcome<PairRun>>>,
    /// `[mesh][basis]`, when embedding metrics were requested.
    pub embedding: Option<Vec<Vec<Outcome<EmbeddingMetrics>>>>,
    pub summaries: Vec<BasisSummary>,
    pub failures: Vec<Failure>,
}

impl Comparison {
    pub fn age(&self, pair: usize, basis: usize) -> Option<f64> {
        self.runs[pair][basis].as_ref().ok().and_then(|r| r.age)
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn mesh_failures(engine: &Engine, out: &mut Vec<Failure>) {
    for (m, prep) in engine.data.meshes.iter().zip(&engine.prepared) {
        if let Err(e) = prep {
            out.push(Failure {
                stage: "mesh".into(),
                item: m.name.clone(),
                basis: None,
                error: e.clone(),
            });
        }
    }
}

/// Runs every configured basis on every pair, plus embedding metrics per
/// mesh when `embedding_metrics` is set.
pub fn compare_bases(config: &ExperimentConfig, data: &Dataset) -> Comparison {
    let engine = Engine::new(config, data);
    let labels: Vec<String> = config.bases.iter().map(BasisSpec::label).collect();
    let mut failures = Vec::new();
    mesh_failures(&engine, &mut failures);
    let mut by_basis = Vec::with_capacity(config.bases.len());
    let mut embedding_by_basis = Vec::new();
    for (spec, label) in config.bases.iter().zip(&labels) {
        let bases = engine.bases(spec);
        for (m, (b, prep)) in data.meshes.iter().zip(bases.iter().zip(&engine.prepared)) {
            if let (Err(e), Ok(_)) = (b, prep) {
                failures.push(Failure {
                    stage: "basis".into(),
                    item: m.name.clone(),
                    basis: Some(label.clone()),
                    error: e.clone(),
                });
            }
        }
        by_basis.push(engine.run_pairs(&bases));
        if config.embedding_metrics {
            embedding_by_basis.push(engine.embedding(&bases));
        }
    }
    let runs: Vec<Vec<Outcome<PairRun>>> = (0..data.pairs.len())
        .map(|p| by_basis.iter().map(|b| b[p].clone()).collect())
        .collect();
    for (pair, row) in data.pairs.iter().zip(&runs) {
        for (label, run) in labels.iter().zip(row) {
            if let Err(e) = run {
                failures.push(Failure {
                    stage: "pair".into(),
                    item: pair.name.clone(),
                    basis: Some(label.clone()),
                    error: e.clone(),
                });
            }
        }
    }
    let embedding = config.embedding_metrics.then(|| {
        (0..data.meshes.len())
            .map(|m| embedding_by_basis.iter().map(|b| b[m].clone()).collect())
            .collect::<Vec<Vec<_>>>()
    });
    let baseline = config.bases.iter().position(|b| b.kind == BasisKind::Lb);
    let mut comparison = Comparison {
        labels,
        pair_names: data.pairs.iter().map(|p| p.name.clone()).collect(),
        mesh_names: data.meshes.iter().map(|m| m.name.clone()).collect(),
        baseline,
        runs,
        embedding,
        summaries: Vec::new(),
        failures,
    };
    comparison.summaries = (0..config.bases.len())
        .map(|b| summarize(&comparison, b))
        .collect();
    comparison
}

fn summarize(c: &Comparison, b: usize) -> BasisSummary {
    let pairs = 0..c.pair_names.len();
    let ages: Vec<f64> = pairs.clone().filter_map(|p| c.age(p, b)).collect();
    let (mut res, mut wins) = (Vec::new(), 0);
    if let Some(base) = c.baseline {
        for p in pairs {
            if let (Some(ours), Some(lb)) = (c.age(p, b), c.age(p, base)) {
                if ours < lb {
                    wins += 1;
                }
                if let Ok(re) = relative_error(ours, lb) {
                    res.push(re);
                }
            }
        }
    }
    let embedded = |f: fn(&EmbeddingMetrics) -> f64| {
        c.embedding
            .as_ref()
            .and_then(|e| mean(e.iter().filter_map(|row| row[b].as_ref().ok()).map(f)))
    };
    BasisSummary {
        label: c.labels[b].clone(),
        completed: c.runs.iter().filter(|row| row[b].is_ok()).count(),
        mean_age: mean(ages),
        mre: mean_relative_error(&res).ok(),
        wins,
        mean_egdc: embedded(EmbeddingMetrics::mean_egdc),
        mean_mgd: embedded(EmbeddingMetrics::mean_mgd),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Sigma,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Mean AGE over the pairs that completed.
    pub mean_age: Option<f64>,
    /// Mean MGD over every mesh of the set.
    pub mean_mgd: Option<f64>,
    pub mean_egdc: Option<f64>,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub parameter: SweepParam,
    pub basis: String,
    pub pipeline: Pipeline,
    pub rows: Vec<SweepRow>,
    /// Row minimizing mean MGD: the selection that needs no ground truth.
    pub selected: Option<usize>,
    /// Row minimizing mean AGE.
    pub best_age: Option<usize>,
    pub failures: Vec<Failure>,
}

fn argmin(values: impl Iterator<Item = Option<f64>>) -> Option<usize> {
    values
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// The first Gaussian-family basis of the config (PC-Gau by default),
/// rebuilt at each grid value of `σ` or `q`.
pub fn run_sweep(
    config: &ExperimentConfig,
    data: &Dataset,
    parameter: SweepParam,
    grid: &[f64],
) -> SweepReport {
    let base = config
        .bases
        .iter()
        .find(|b| b.kind.uses_sigma())
        .cloned()
        .unwrap_or_else(|| BasisSpec::new(BasisKind::Pcgau));
    let engine = Engine::new(config, data);
    let mut failures = Vec::new();
    mesh_failures(&engine, &mut failures);
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut spec = base.clone();
        match parameter {
            SweepParam::Sigma => spec.sigma = Some(value),
            SweepParam::Q => spec.q = Some(value.round() as usize),
        }
        let tag = format!(
            "{}={value}",
            if parameter == SweepParam::Sigma {
                "sigma"
            } else {
                "q"
            }
        );
        let bases = engine.bases(&spec);
        let runs = engine.run_pairs(&bases);
        let embedding = engine.embedding(&bases);
        for (pair, run) in data.pairs.iter().zip(&runs) {
            if let Err(e) = run {
                failures.push(Failure {
                    stage: "pair".into(),
                    item: pair.name.clone(),
                    basis: Some(tag.clone()),
                    error: e.clone(),
                });
            }
        }
        for (m, e) in data.meshes.iter().zip(&embedding) {
            if let Err(e) = e {
                failures.push(Failure {
                    stage: "embedding".into(),
                    item: m.name.clone(),
                    basis: Some(tag.clone()),
                    error: e.clone(),
                });
            }
        }
        let ok_embeddings = || embedding.iter().filter_map(|e| e.as_ref().ok());
        rows.push(SweepRow {
            value,
            mean_age: mean(
                runs.iter()
                    .filter_map(|r| r.as_ref().ok().and_then(|r| r.age)),
            ),
            mean_mgd: mean(ok_embeddings().map(EmbeddingMetrics::mean_mgd)),
            mean_egdc: mean(ok_embeddings().map(EmbeddingMetrics::mean_egdc)),
            completed: runs.iter().filter(|r| r.is_ok()).count(),
        });
    }
    SweepReport {
        parameter,
        basis: base.label(),
        pipeline: config.pipeline,
        selected: argmin(rows.iter().map(|r| r.mean_mgd)),
        best_age: argmin(rows.iter().map(|r| r.mean_age)),
        rows,
        failures,
    }
}
