//! CSV, JSON and PLY outputs of the harness. Floats use Rust's shortest
//! round-trip formatting, and nothing time-dependent is written, so equal
//! inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use pcd_core::metrics::{cumulative_curve, threshold_grid, EvalReport};
use pcd_core::TriMesh;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::harness::{
    BasisSummary, Comparison, EmbeddingSummary, Failure, SweepParam, SweepReport,
};
use crate::mesh_io::save_ply_quality;
use crate::text_io::write_map;

/// Largest threshold of the cumulative curves, for unit-area meshes.
pub const CURVE_MAX: f64 = 0.25;
pub const CURVE_STEPS: usize = 50;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::file(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    })
}

/// File-name-safe version of a pair or basis label.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    pipeline: &'static str,
    k: usize,
    seed: u64,
    pairs: usize,
    baseline: Option<&'a str>,
    bases: &'a [BasisSummary],
    /// Fraction of vertices (pooled over pairs) under each error threshold.
    curves: Vec<Curve<'a>>,
    failures: usize,
}

#[derive(Serialize)]
struct Curve<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

/// Writes `ages.csv`, `summary.csv`, `summary.json`, `errors.json`, and
/// `embedding.csv` when embedding metrics were computed. With `per_vertex`
/// set, also every predicted map and per-vertex error (CSV, plus PLY quality
/// on the source mesh when the ground truth is dense).
pub fn write_comparison(
    c: &Comparison,
    config: &ExperimentConfig,
    data: &Dataset,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();

    let path = dir.join("ages.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(std::iter::once("pair").chain(c.labels.iter().map(String::as_str)))?;
    for (p, name) in c.pair_names.iter().enumerate() {
        let ages: Vec<String> = (0..c.labels.len()).map(|b| opt(c.age(p, b))).collect();
        w.write_record(std::iter::once(name.clone()).chain(ages))?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "basis",
        "completed",
        "mean_age",
        "mre",
        "wins",
        "mean_egdc",
        "mean_mgd",
    ])?;
    for s in &c.summaries {
        w.write_record([
            s.label.clone(),
            s.completed.to_string(),
            opt(s.mean_age),
            opt(s.mre),
            s.wins.to_string(),
            opt(s.mean_egdc),
            opt(s.mean_mgd),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let thresholds = threshold_grid(CURVE_MAX, CURVE_STEPS);
    let curves = c
        .labels
        .iter()
        .enumerate()
        .filter_map(|(b, label)| {
            let pooled: Vec<f64> = c
                .runs
                .iter()
                .filter_map(|row| row[b].as_ref().ok())
                .flat_map(|r| r.errors.iter().copied())
                .collect();
            let points = cumulative_curve(&pooled, &thresholds).ok()?;
            Some(Curve { label, points })
        })
        .collect();
    let path = dir.join("summary.json");
    write_json(
        &ComparisonSummary {
            pipeline: config.pipeline.name(),
            k: config.k,
            seed: config.seed,
            pairs: c.pair_names.len(),
            baseline: c.baseline.map(|b| c.labels[b].as_str()),
            bases: &c.summaries,
            curves,
            failures: c.failures.len(),
        },
        &path,
    )?;
    written.push(path);

    let path = dir.join("errors.json");
    write_json(&c.failures, &path)?;
    written.push(path);

    if let Some(embedding) = &c.embedding {
        let path = dir.join("embedding.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["mesh", "basis", "discr", "egdc", "mgd"])?;
        for (mesh, row) in c.mesh_names.iter().zip(embedding) {
            for (label, e) in c.labels.iter().zip(row) {
                if let Ok(e) = e {
                    let s = EmbeddingSummary::from(e);
                    w.write_record([
                        mesh,
                        label,
                        &s.discr.to_string(),
                        &s.egdc.to_string(),
                        &s.mgd.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        written.push(path);
    }

    if config.per_vertex {
        let sub = dir.join("per_vertex");
        create_dir(&sub)?;
        for (p, pair) in data.pairs.iter().enumerate() {
            for (b, label) in c.labels.iter().enumerate() {
                let Ok(run) = &c.runs[p][b] else { continue };
                let stem = format!("{}__{}", slug(&pair.name), slug(label));
                let map_path = sub.join(format!("{stem}.map.txt"));
                write_map(&run.map, &map_path)?;
                written.push(map_path);
                if let Some(gt) = &pair.gt {
                    let path = sub.join(format!("{stem}.errors.csv"));
                    write_vertex_values(
                        gt.pairs().iter().map(|p| p.0),
                        &run.errors,
                        "geodesic_error",
                        &path,
                    )?;
                    written.push(path);
                    let source = &data.meshes[pair.source].mesh;
                    if run.errors.len() == source.vertex_count() {
                        let path = sub.join(format!("{stem}.errors.ply"));
                        save_ply_quality(source, &run.errors, &path)?;
                        written.push(path);
                    }
                }
            }
        }
    }
    Ok(written)
}

/// Two-column CSV: vertex index and value.
pub fn write_vertex_values(
    vertices: impl Iterator<Item = usize>,
    values: &[f64],
    name: &str,
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["vertex", name])?;
    for (v, x) in vertices.zip(values) {
        w.write_record([v.to_string(), x.to_string()])?;
    }
    Ok(w.flush()?)
}

/// Per-vertex discrimination power, EGDC and MGD.
pub fn write_embedding_metrics(e: &pcd_core::metrics::EmbeddingMetrics, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["vertex", "discr", "egdc", "egdc_degenerate", "mgd"])?;
    for v in 0..e.discr.len() {
        w.write_record([
            v.to_string(),
            e.discr[v].to_string(),
            e.egdc[v].to_string(),
            (e.egdc_degenerate[v] as u8).to_string(),
            e.mgd[v].to_string(),
        ])?;
    }
    Ok(w.flush()?)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    age: f64,
    max_error: f64,
    vertices: usize,
    curve: &'a [(f64, f64)],
}

/// `<stem>.json` with AGE and curve samples, `<stem>.csv` per vertex, and
/// `<stem>.ply` with the errors as vertex quality when `mesh` is given.
pub fn write_eval(
    report: &EvalReport,
    vertices: &[usize],
    mesh: Option<&TriMesh>,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    create_dir(dir)?;
    let max_error = report.per_vertex_error.iter().copied().fold(0.0, f64::max);
    write_json(
        &EvalSummary {
            age: report.age,
            max_error,
            vertices: report.per_vertex_error.len(),
            curve: &report.cumulative_curve,
        },
        &dir.join(format!("{stem}.json")),
    )?;
    write_vertex_values(
        vertices.iter().copied(),
        &report.per_vertex_error,
        "geodesic_error",
        &dir.join(format!("{stem}.csv")),
    )?;
    if let Some(mesh) = mesh {
        save_ply_quality(
            mesh,
            &report.per_vertex_error,
            &dir.join(format!("{stem}.ply")),
        )?;
    }
    Ok(())
}

/// `sweep_<param>.csv` and `sweep_<param>.json`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let name = match report.parameter {
        SweepParam::Sigma => "sigma",
        SweepParam::Q => "q",
    };
    let csv_path = dir.join(format!("sweep_{name}.csv"));
    let mut w = csv_writer(&csv_path)?;
    w.write_record([
        name,
        "mean_age",
        "mean_mgd",
        "mean_egdc",
        "completed",
        "selected_by_mgd",
        "best_age",
    ])?;
    for (i, r) in report.rows.iter().enumerate() {
        w.write_record([
            r.value.to_string(),
            opt(r.mean_age),
            opt(r.mean_mgd),
            opt(r.mean_egdc),
            r.completed.to_string(),
            ((report.selected == Some(i)) as u8).to_string(),
            ((report.best_age == Some(i)) as u8).to_string(),
        ])?;
    }
    w.flush()?;
    let json_path = dir.join(format!("sweep_{name}.json"));
    write_json(report, &json_path)?;
    Ok(vec![csv_path, json_path])
}

/// Error manifest on its own, for commands that fail before a report exists.
pub fn write_failures(failures: &[Failure], path: &Path) -> Result<()> {
    write_json(&failures, path)
}
