//! Meshes and pairs held in memory for an experiment.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use pcd_core::mesh::normalize_to_unit_area;
use pcd_core::{GroundTruth, Landmarks, PointwiseMap, TriMesh};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Manifest, PairSpec};
use crate::error::{Error, Result};
use crate::mesh_io::load_mesh;
use crate::synthetic;
use crate::text_io::{read_ground_truth, read_indices, read_landmarks};

#[derive(Debug, Clone)]
pub struct NamedMesh {
    pub name: String,
    pub mesh: TriMesh,
}

/// Indices into [`Dataset::meshes`]; `source` is `N`, `target` is `M`.
#[derive(Debug, Clone)]
pub struct Pair {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub gt: Option<GroundTruth>,
    pub landmarks: Option<Landmarks>,
}

impl Pair {
    /// The ground truth as a full map of `N`, if it covers every vertex in order.
    pub fn dense_gt(&self, source_count: usize, target_count: usize) -> Option<PointwiseMap> {
        let gt = self.gt.as_ref()?;
        if gt.len() != source_count || gt.pairs().iter().enumerate().any(|(i, p)| p.0 != i) {
            return None;
        }
        PointwiseMap::new(gt.pairs().iter().map(|p| p.1).collect(), target_count).ok()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub meshes: Vec<NamedMesh>,
    pub pairs: Vec<Pair>,
}

impl Dataset {
    /// Builds the dataset a config describes: explicit pairs, a manifest, or
    /// the synthetic pair set (also used when the config names no data).
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let mut data = if let Some(m) = &config.manifest {
            from_manifest(m, config.seed)?
        } else if !config.pairs.is_empty() {
            from_pairs(&config.pairs)?
        } else {
            synthetic::generate(&config.synthetic.clone().unwrap_or_default())
        };
        if config.normalize_area {
            for m in &mut data.meshes {
                m.mesh = normalize_to_unit_area(&m.mesh);
            }
        }
        Ok(data)
    }

    /// A single mesh matched with itself under the identity.
    pub fn self_pair(name: &str, mesh: TriMesh, landmarks: &[usize]) -> Result<Self> {
        let n = mesh.vertex_count();
        Ok(Self {
            pairs: vec![Pair {
                name: format!("{name}-{name}"),
                source: 0,
                target: 0,
                gt: Some(GroundTruth::dense(&PointwiseMap::identity(n))),
                landmarks: Some(Landmarks::new(
                    landmarks.iter().map(|&v| (v, v)).collect(),
                    n,
                    n,
                )?),
            }],
            meshes: vec![NamedMesh {
                name: name.into(),
                mesh,
            }],
        })
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

struct MeshTable {
    meshes: Vec<NamedMesh>,
    index: HashMap<PathBuf, usize>,
}

impl MeshTable {
    fn get(&mut self, path: &Path) -> Result<usize> {
        if let Some(&i) = self.index.get(path) {
            return Ok(i);
        }
        let mesh = load_mesh(path)?;
        self.meshes.push(NamedMesh {
            name: stem(path),
            mesh,
        });
        self.index.insert(path.to_path_buf(), self.meshes.len() - 1);
        Ok(self.meshes.len() - 1)
    }
}

fn from_pairs(specs: &[PairSpec]) -> Result<Dataset> {
    let mut table = MeshTable {
        meshes: Vec::new(),
        index: HashMap::new(),
    };
    let mut pairs = Vec::with_capacity(specs.len());
    for spec in specs {
        let source = table.get(&spec.source)?;
        let target = table.get(&spec.target)?;
        let (ns, nt) = (
            table.meshes[source].mesh.vertex_count(),
            table.meshes[target].mesh.vertex_count(),
        );
        let gt = match &spec.gt {
            Some(p) => {
                Some(read_ground_truth(p, spec.gt_one_based, ns, nt).map_err(|e| in_file(p, e))?)
            }
            None => None,
        };
        let landmarks = match &spec.landmarks {
            Some(p) => Some(read_landmarks(p, false, ns, nt).map_err(|e| in_file(p, e))?),
            None => None,
        };
        pairs.push(Pair {
            name: spec
                .name
                .clone()
                .unwrap_or_else(|| format!("{}-{}", stem(&spec.source), stem(&spec.target))),
            source,
            target,
            gt,
            landmarks,
        });
    }
    Ok(Dataset {
        meshes: table.meshes,
        pairs,
    })
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => {
            Error::Format(format!("{}: line {line}: {message}", path.display()))
        }
        Error::File { .. } => e,
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// `pair_count` distinct ordered pairs drawn with `seed` from meshes in
/// vertex-to-vertex correspondence.
fn from_manifest(m: &Manifest, seed: u64) -> Result<Dataset> {
    let meshes: Vec<NamedMesh> = m
        .meshes
        .iter()
        .map(|p| {
            Ok(NamedMesh {
                name: stem(p),
                mesh: load_mesh(p)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = meshes[0].mesh.vertex_count();
    if let Some(bad) = meshes.iter().find(|x| x.mesh.vertex_count() != n) {
        return Err(Error::Config(format!(
            "manifest meshes must share connectivity; {} has {} vertices, expected {n}",
            bad.name,
            bad.mesh.vertex_count()
        )));
    }
    let landmarks = match &m.landmarks {
        Some(p) => {
            let ids = read_indices(p, false).map_err(|e| in_file(p, e))?;
            Some(Landmarks::new(
                ids.into_iter().map(|v| (v, v)).collect(),
                n,
                n,
            )?)
        }
        None => None,
    };
    let mut all: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|a| {
            (0..meshes.len())
                .filter(move |&b| b != a)
                .map(move |b| (a, b))
        })
        .collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let gt = GroundTruth::dense(&PointwiseMap::identity(n));
    let pairs = all
        .into_iter()
        .take(m.pair_count)
        .map(|(a, b)| Pair {
            name: format!("{}-{}", meshes[a].name, meshes[b].name),
            source: a,
            target: b,
            gt: Some(gt.clone()),
            landmarks: landmarks.clone(),
        })
        .collect();
    Ok(Dataset { meshes, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::save_off;
    use pcd_core::shapes;

    #[test]
    fn manifest_pairs_are_distinct_and_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<PathBuf> = (0..4)
            .map(|i| {
                let p = dir.path().join(format!("m{i}.off"));
                save_off(&shapes::icosphere(1).scaled(1.0 + i as f64).unwrap(), &p).unwrap();
                p
            })
            .collect();
        let m = Manifest {
            meshes: paths,
            pair_count: 12,
            landmarks: None,
        };
        let a = from_manifest(&m, 5).unwrap();
        let mut seen: Vec<(usize, usize)> = a.pairs.iter().map(|p| (p.source, p.target)).collect();
        assert!(seen.iter().all(|(s, t)| s != t));
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 12);
        let b = from_manifest(
            &Manifest {
                pair_count: 5,
                ..m.clone()
            },
            5,
        )
        .unwrap();
        let c = from_manifest(&Manifest { pair_count: 5, ..m }, 6).unwrap();
        let order = |d: &Dataset| {
            d.pairs
                .iter()
                .map(|p| (p.source, p.target))
                .collect::<Vec<_>>()
        };
        assert_eq!(order(&b), order(&a)[..5]);
        assert_ne!(order(&b), order(&c));
    }

    #[test]
    fn dense_gt_requires_full_ordered_coverage() {
        let mut d = Dataset::self_pair("s", shapes::icosphere(0), &[]).unwrap();
        assert_eq!(
            d.pairs[0].dense_gt(12, 12),
            Some(PointwiseMap::identity(12))
        );
        d.pairs[0].gt = Some(GroundTruth::sparse(vec![(3, 1)], 12, 12).unwrap());
        assert_eq!(d.pairs[0].dense_gt(12, 12), None);
    }
}
