use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pcd::config::{BasisKind, BasisSpec, ExperimentConfig, Overrides, Pipeline, Sampling};
use pcd::dataset::{Dataset, NamedMesh, Pair};
use pcd::harness::{self, compare_bases, run_sweep, SweepParam};
use pcd::synthetic::{self, SyntheticSpec};
use pcd::{matrix_io, mesh_io, report, text_io};
use pcd_core::mesh::normalize_to_unit_area;
use pcd_core::metrics::{embedding_metrics, geodesic_error, threshold_grid, EvalReport};

#[derive(Parser)]
#[command(
    name = "pcd",
    version,
    about = "Dictionary principal-component bases and functional-map experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command. A flag beats the config field, which beats the default.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    basis: Option<BasisKind>,
    /// Number of basis functions.
    #[arg(long)]
    k: Option<usize>,
    /// Gaussian width for the Gaussian-family recipes (unit-area meshes).
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of sampled dictionary centres.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum)]
    pipeline: Option<Pipeline>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build one basis on a mesh and export it.
    Basis {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum)]
        sampling: Option<Sampling>,
        /// Also write the sampled centres, one vertex per line.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Keep the mesh's scale instead of rescaling it to unit area.
        #[arg(long)]
        keep_scale: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a pipeline on one pair.
    Match {
        /// Mesh `N`, whose vertices are mapped.
        #[arg(long)]
        source: PathBuf,
        /// Mesh `M`.
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        one_based: bool,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the configured bases over a pair list (the synthetic set by default).
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep σ or q of the first Gaussian-family basis.
    Sweep {
        #[arg(long, value_enum, default_value = "sigma")]
        param: SweepParam,
        /// Comma-separated grid; defaults to the config's grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Score an existing map against ground truth, or a saved basis by its embedding metrics.
    Metrics {
        /// Mesh `N` (the map's domain).
        #[arg(long)]
        source: Option<PathBuf>,
        /// Mesh `M`, on which errors are measured; also the mesh of `--embedding`.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, requires = "gt")]
        map: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        one_based: bool,
        /// Basis file (PCDM) whose rows embed the vertices of `--target`.
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long)]
        keep_scale: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write the synthetic pair set to disk with a config that replays it.
    Synth {
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 3)]
        subdivisions: usize,
        #[arg(long, default_value_t = 16)]
        segments: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        basis: c.basis,
        k: c.k,
        sigma: c.sigma,
        q: c.q,
        pipeline: c.pipeline,
        seed: c.seed,
        out: c.out.clone(),
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut config = match &c.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    config.apply(&overrides(c));
    config.validate()?;
    Ok(config)
}

fn load(path: &Path, keep_scale: bool) -> Result<pcd_core::TriMesh> {
    let mesh = mesh_io::load_mesh(path)?;
    Ok(if keep_scale {
        mesh
    } else {
        normalize_to_unit_area(&mesh)
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into())
}

fn print_summary(c: &harness::Comparison) {
    println!(
        "{:<14} {:>9} {:>12} {:>10} {:>6} {:>9} {:>9}",
        "basis", "completed", "mean AGE", "MRE", "wins", "EGDC", "MGD"
    );
    let f = |v: Option<f64>, p: usize| v.map_or("-".into(), |x| format!("{x:.p$}"));
    for s in &c.summaries {
        println!(
            "{:<14} {:>9} {:>12} {:>10} {:>6} {:>9} {:>9}",
            s.label,
            s.completed,
            f(s.mean_age, 6),
            f(s.mre.map(|m| 100.0 * m), 2),
            s.wins,
            f(s.mean_egdc, 4),
            f(s.mean_mgd, 4)
        );
    }
    if !c.failures.is_empty() {
        eprintln!("{} unit(s) failed; see errors.json", c.failures.len());
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let started = Instant::now();
    match cli.command {
        Command::Basis {
            mesh,
            sampling,
            samples,
            keep_scale,
            common,
        } => {
            let config = load_config(&common)?;
            let mut spec = config
                .bases
                .iter()
                .rev()
                .find(|b| common.basis.is_none_or(|k| b.kind == k))
                .cloned()
                .unwrap_or_else(|| BasisSpec::new(common.basis.unwrap_or(BasisKind::Pcgau)));
            if let Some(s) = sampling {
                spec.sampling = s;
            }
            let m = load(&mesh, keep_scale)?;
            let prep = harness::Prepared::new(&m, config.k.max(config.spectral_k), false)?;
            let basis = harness::build_basis(&m, &prep, &spec, config.k, config.seed)?;
            let out = common
                .out
                .unwrap_or_else(|| PathBuf::from(format!("{}.{}.pcdm", stem(&mesh), spec.label())));
            matrix_io::save_basis(&basis, &out)?;
            if let Some(path) = samples {
                text_io::write_samples(&harness::samples(&m, &spec, config.seed)?, &path)?;
            }
            println!(
                "{} atoms of {} on {} vertices -> {}",
                basis.k(),
                spec.label(),
                m.vertex_count(),
                out.display()
            );
        }
        Command::Match {
            source,
            target,
            gt,
            one_based,
            landmarks,
            common,
        } => {
            let mut config = load_config(&common)?;
            if let Some(kind) = common.basis {
                config.bases = vec![BasisSpec {
                    sigma: common.sigma,
                    q: common.q,
                    ..BasisSpec::new(kind)
                }];
            }
            let (n, m) = (load(&source, false)?, load(&target, false)?);
            let (nn, nm) = (n.vertex_count(), m.vertex_count());
            let pair = Pair {
                name: format!("{}-{}", stem(&source), stem(&target)),
                source: 0,
                target: 1,
                gt: gt
                    .as_deref()
                    .map(|p| text_io::read_ground_truth(p, one_based, nn, nm))
                    .transpose()?,
                landmarks: landmarks
                    .as_deref()
                    .map(|p| text_io::read_landmarks(p, one_based, nn, nm))
                    .transpose()?,
            };
            let data = Dataset {
                meshes: vec![
                    NamedMesh {
                        name: stem(&source),
                        mesh: n,
                    },
                    NamedMesh {
                        name: stem(&target),
                        mesh: m,
                    },
                ],
                pairs: vec![pair],
            };
            let comparison = compare_bases(&config, &data);
            let dir = config.out.clone();
            report::write_comparison(&comparison, &config, &data, &dir)?;
            for (label, run) in comparison.labels.iter().zip(&comparison.runs[0]) {
                match run {
                    Ok(run) => {
                        text_io::write_map(&run.map, &dir.join(format!("{label}.map.txt")))?;
                        std::fs::write(
                            dir.join(format!("{label}.fmap.pcdm")),
                            matrix_io::encode_matrix(&run.fmap.c),
                        )?;
                        let age = run
                            .age
                            .map_or("no ground truth".into(), |a| format!("AGE {a:.6}"));
                        println!("{label}: {age}");
                    }
                    Err(e) => eprintln!("{label}: failed: {e}"),
                }
            }
            if comparison.runs[0].iter().all(Result::is_err) {
                bail!("every basis failed on this pair");
            }
        }
        Command::Bench { common } => {
            let config = load_config(&common)?;
            let data = Dataset::from_config(&config)?;
            eprintln!(
                "{} meshes, {} pairs, pipeline {}",
                data.meshes.len(),
                data.pairs.len(),
                config.pipeline.name()
            );
            let comparison = compare_bases(&config, &data);
            report::write_comparison(&comparison, &config, &data, &config.out)?;
            print_summary(&comparison);
            eprintln!(
                "reports in {} ({:.1?})",
                config.out.display(),
                started.elapsed()
            );
        }
        Command::Sweep {
            param,
            grid,
            common,
        } => {
            let config = load_config(&common)?;
            let grid = grid.unwrap_or_else(|| match param {
                SweepParam::Sigma => config.sigma_grid.clone(),
                SweepParam::Q => config.q_grid.iter().map(|&q| q as f64).collect(),
            });
            let data = Dataset::from_config(&config)?;
            let sweep = run_sweep(&config, &data, param, &grid);
            report::write_sweep(&sweep, &config.out)?;
            println!(
                "{:>10} {:>12} {:>10} {:>10}",
                "value", "mean AGE", "mean MGD", "mean EGDC"
            );
            for (i, r) in sweep.rows.iter().enumerate() {
                let f = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.6}"));
                let mark = if sweep.selected == Some(i) {
                    "  <- min MGD"
                } else {
                    ""
                };
                println!(
                    "{:>10} {:>12} {:>10} {:>10}{mark}",
                    r.value,
                    f(r.mean_age),
                    f(r.mean_mgd),
                    f(r.mean_egdc)
                );
            }
        }
        Command::Metrics {
            source,
            target,
            map,
            gt,
            one_based,
            embedding,
            keep_scale,
            common,
        } => {
            let out = common.out.unwrap_or_else(|| PathBuf::from("metrics"));
            let m = load(&target, keep_scale)?;
            if map.is_none() && embedding.is_none() {
                bail!("give --map with --gt, or --embedding");
            }
            if let (Some(map), Some(gt)) = (map, gt) {
                let n_count = match &source {
                    Some(p) => mesh_io::load_mesh(p)?.vertex_count(),
                    None => m.vertex_count(),
                };
                let pred = text_io::read_map(&map, one_based, m.vertex_count())?;
                let truth = text_io::read_ground_truth(&gt, one_based, n_count, m.vertex_count())?;
                let errors = geodesic_error(&pred, &truth, &m)?;
                let eval = EvalReport::new(
                    errors,
                    &threshold_grid(report::CURVE_MAX, report::CURVE_STEPS),
                )?;
                let vertices: Vec<usize> = truth.pairs().iter().map(|p| p.0).collect();
                let source_mesh = match &source {
                    Some(p) if vertices.len() == n_count => Some(load(p, keep_scale)?),
                    _ => None,
                };
                report::write_eval(&eval, &vertices, source_mesh.as_ref(), &out, "map")?;
                println!("AGE {:.6} over {} vertices", eval.age, vertices.len());
            }
            if let Some(path) = embedding {
                let basis = matrix_io::load_basis(&path)?;
                let config = load_config(&Common {
                    out: None,
                    ..common
                })?;
                let e = embedding_metrics(
                    &basis.atoms,
                    &m,
                    config.egdc_neighbors,
                    config.mgd_neighbors,
                )?;
                std::fs::create_dir_all(&out)
                    .with_context(|| format!("creating {}", out.display()))?;
                report::write_embedding_metrics(&e, &out.join("embedding.csv"))?;
                mesh_io::save_ply_quality(&m, &e.mgd, &out.join("mgd.ply"))?;
                mesh_io::save_ply_quality(&m, &e.egdc, &out.join("egdc.ply"))?;
                println!(
                    "discr {:.6}  EGDC {:.4}  MGD {:.4}",
                    e.mean_discr(),
                    e.mean_egdc(),
                    e.mean_mgd()
                );
            }
        }
        Command::Synth {
            pairs,
            subdivisions,
            segments,
            common,
        } => {
            let spec = SyntheticSpec {
                pairs,
                seed: common.seed.unwrap_or(1),
                subdivisions,
                segments,
            };
            let out = common.out.unwrap_or_else(|| PathBuf::from("synthetic"));
            let data = synthetic::generate(&spec);
            synthetic::write(&data, &out)?;
            println!(
                "{} meshes of {} vertices, {} pairs -> {}",
                data.meshes.len(),
                data.meshes[0].mesh.vertex_count(),
                data.pairs.len(),
                out.display()
            );
        }
    }
    Ok(())
}
