//! Experiment configuration: one JSON document, overridable from the command
//! line. Precedence is command-line flag, then config field, then default.
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use pcd_core::dictionary::{DEFAULT_HEAT_TIME, DEFAULT_Q, DEFAULT_SIGMA, DEFAULT_SPEC_ALPHA};
use pcd_core::fmap::{DEFAULT_K_INI, DEFAULT_ZOOMOUT_STEP};
use pcd_core::metrics::{DEFAULT_EGDC_NEIGHBORS, DEFAULT_MGD_NEIGHBORS};
use pcd_core::pcd::{RankPolicy, DEFAULT_K};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Lb,
    Pcgau,
    Adapt,
    Heat,
    Spec,
    Wks,
    Wksgau,
    Wave,
}

impl BasisKind {
    pub const ALL: [BasisKind; 8] = [
        BasisKind::Lb,
        BasisKind::Pcgau,
        BasisKind::Adapt,
        BasisKind::Heat,
        BasisKind::Spec,
        BasisKind::Wks,
        BasisKind::Wksgau,
        BasisKind::Wave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Lb => "lb",
            BasisKind::Pcgau => "pcgau",
            BasisKind::Adapt => "adapt",
            BasisKind::Heat => "heat",
            BasisKind::Spec => "spec",
            BasisKind::Wks => "wks",
            BasisKind::Wksgau => "wksgau",
            BasisKind::Wave => "wave",
        }
    }

    /// Whether the recipe places atoms at sampled vertices.
    pub fn uses_samples(self) -> bool {
        !matches!(self, BasisKind::Lb | BasisKind::Wks)
    }

    /// Whether the recipe has a Gaussian width `σ`.
    pub fn uses_sigma(self) -> bool {
        matches!(
            self,
            BasisKind::Pcgau | BasisKind::Adapt | BasisKind::Wksgau
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// Functional map from the ground-truth correspondence.
    #[default]
    Gt,
    /// Product-preservation estimate from WKS descriptors and landmarks.
    No17,
    /// The product-preservation estimate at `k_ini`, refined up to `k`.
    Zoomout,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Gt => "gt",
            Pipeline::No17 => "no17",
            Pipeline::Zoomout => "zoomout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Fps,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankPolicyName {
    Strict,
    Complete,
}

impl From<RankPolicyName> for RankPolicy {
    fn from(p: RankPolicyName) -> Self {
        match p {
            RankPolicyName::Strict => RankPolicy::Strict,
            RankPolicyName::Complete => RankPolicy::Complete,
        }
    }
}

/// One basis column of an experiment. Unset parameters take the recipe defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub kind: BasisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sampling: Sampling,
    /// Defaults to `complete` for WKS, whose numerical rank is below 60, and
    /// `strict` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_policy: Option<RankPolicyName>,
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl BasisSpec {
    pub fn new(kind: BasisKind) -> Self {
        Self {
            kind,
            label: None,
            sigma: None,
            q: None,
            t: None,
            alpha: None,
            sampling: Sampling::Fps,
            rank_policy: None,
            normalize: true,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(DEFAULT_SIGMA)
    }

    pub fn q(&self) -> usize {
        self.q.unwrap_or(DEFAULT_Q)
    }

    pub fn t(&self) -> f64 {
        self.t.unwrap_or(DEFAULT_HEAT_TIME)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_SPEC_ALPHA)
    }

    pub fn rank_policy(&self) -> RankPolicy {
        match (self.rank_policy, self.kind) {
            (Some(p), _) => p.into(),
            (None, BasisKind::Wks) => RankPolicy::Complete,
            (None, _) => RankPolicy::Strict,
        }
    }
}

/// One mesh pair. `source` is `N` (the shape whose vertices are mapped) and
/// `target` is `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub source: PathBuf,
    pub target: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    #[serde(default)]
    pub gt_one_based: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
}

/// A mesh collection in vertex-to-vertex correspondence (same connectivity),
/// from which `pair_count` ordered pairs are drawn with the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub meshes: Vec<PathBuf>,
    pub pair_count: usize,
    /// Landmark vertex ids, one per line, shared by every mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
    /// Generate the bundled posed-figure pair set instead of reading meshes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_bases")]
    pub bases: Vec<BasisSpec>,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_k_ini")]
    pub k_ini: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    /// LB eigenpairs behind the spectral recipes and WKS descriptors.
    #[serde(default = "default_spectral_k")]
    pub spectral_k: usize,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Rescale every mesh to unit area after loading.
    #[serde(default = "yes")]
    pub normalize_area: bool,
    /// Also compute EGDC and MGD of every basis on every mesh.
    #[serde(default)]
    pub embedding_metrics: bool,
    #[serde(default = "default_egdc_neighbors")]
    pub egdc_neighbors: usize,
    #[serde(default = "default_mgd_neighbors")]
    pub mgd_neighbors: usize,
    /// Write per-vertex error CSV and PLY files for every pair and basis.
    #[serde(default)]
    pub per_vertex: bool,
}

fn default_bases() -> Vec<BasisSpec> {
    vec![
        BasisSpec::new(BasisKind::Lb),
        BasisSpec::new(BasisKind::Pcgau),
    ]
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_k_ini() -> usize {
    DEFAULT_K_INI
}
fn default_step() -> usize {
    DEFAULT_ZOOMOUT_STEP
}
fn default_spectral_k() -> usize {
    100
}
fn default_sigma_grid() -> Vec<f64> {
    vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
}
fn default_q_grid() -> Vec<usize> {
    vec![100, 300, 1000]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_egdc_neighbors() -> usize {
    DEFAULT_EGDC_NEIGHBORS
}
fn default_mgd_neighbors() -> usize {
    DEFAULT_MGD_NEIGHBORS
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

/// Command-line values that replace config fields when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub basis: Option<BasisKind>,
    pub k: Option<usize>,
    pub sigma: Option<f64>,
    pub q: Option<usize>,
    pub pipeline: Option<Pipeline>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut config = Self::from_json(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for pair in &mut self.pairs {
            fix(&mut pair.source);
            fix(&mut pair.target);
            pair.gt.as_mut().map(fix);
            pair.landmarks.as_mut().map(fix);
        }
        if let Some(manifest) = &mut self.manifest {
            manifest.meshes.iter_mut().for_each(fix);
            manifest.landmarks.as_mut().map(fix);
        }
        fix(&mut self.out);
    }

    /// `--basis` replaces the basis list with that basis (behind an LB
    /// baseline when it is not LB itself); `--sigma` and `--q` apply to every
    /// basis that uses them.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(kind) = o.basis {
            self.bases = match kind {
                BasisKind::Lb => vec![BasisSpec::new(kind)],
                _ => vec![BasisSpec::new(BasisKind::Lb), BasisSpec::new(kind)],
            };
        }
        for basis in &mut self.bases {
            if let Some(sigma) = o.sigma.filter(|_| basis.kind.uses_sigma()) {
                basis.sigma = Some(sigma);
            }
            if let Some(q) = o.q.filter(|_| basis.kind.uses_samples()) {
                basis.q = Some(q);
            }
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(p) = o.pipeline {
            self.pipeline = p;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let sources = self.pairs.len().min(1)
            + self.manifest.is_some() as usize
            + self.synthetic.is_some() as usize;
        if sources > 1 {
            return bad("give only one of `pairs`, `manifest` and `synthetic`".into());
        }
        if self.bases.is_empty() {
            return bad("no bases configured".into());
        }
        let mut labels: Vec<String> = self.bases.iter().map(BasisSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("basis label {:?} is used twice; set `label`", w[0]));
        }
        if self.k == 0 || self.step == 0 {
            return bad("k and step must be positive".into());
        }
        if self.pipeline == Pipeline::Zoomout && self.k_ini > self.k {
            return bad(format!("k_ini = {} exceeds k = {}", self.k_ini, self.k));
        }
        if self.spectral_k < self.k {
            return bad(format!(
                "spectral_k = {} is below k = {}",
                self.spectral_k, self.k
            ));
        }
        for b in &self.bases {
            if b.sigma.is_some_and(|s| !(s > 0.0)) || b.q == Some(0) {
                return bad(format!("basis {}: sigma and q must be positive", b.label()));
            }
        }
        let mut files: Vec<&Path> = Vec::new();
        for pair in &self.pairs {
            files.extend([pair.source.as_path(), pair.target.as_path()]);
            files.extend(pair.gt.as_deref());
            files.extend(pair.landmarks.as_deref());
            if self.pipeline == Pipeline::Gt && pair.gt.is_none() {
                return bad(format!(
                    "pair {} has no gt map for the gt pipeline",
                    pair.source.display()
                ));
            }
            if self.pipeline != Pipeline::Gt && pair.landmarks.is_none() {
                return bad(format!(
                    "pair {} has no landmarks for the {} pipeline",
                    pair.source.display(),
                    self.pipeline.name()
                ));
            }
        }
        if let Some(m) = &self.manifest {
            if m.meshes.len() < 2 {
                return bad("a manifest needs at least two meshes".into());
            }
            if m.pair_count > m.meshes.len() * (m.meshes.len() - 1) {
                return bad(format!(
                    "{} meshes do not give {} distinct pairs",
                    m.meshes.len(),
                    m.pair_count
                ));
            }
            if self.pipeline != Pipeline::Gt && m.landmarks.is_none() {
                return bad(format!(
                    "the {} pipeline needs manifest landmarks",
                    self.pipeline.name()
                ));
            }
            files.extend(m.meshes.iter().map(PathBuf::as_path));
            files.extend(m.landmarks.as_deref());
        }
        if let Some(missing) = files.iter().find(|p| !p.is_file()) {
            return bad(format!("{} does not exist", missing.display()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.k, c.k_ini, c.step, c.spectral_k), (60, 16, 2, 100));
        assert_eq!(c.pipeline, Pipeline::Gt);
        assert_eq!(
            c.bases.iter().map(|b| b.kind).collect::<Vec<_>>(),
            [BasisKind::Lb, BasisKind::Pcgau]
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn flags_beat_config_fields() {
        let mut c = ExperimentConfig::from_json(
            r#"{"k": 40, "seed": 3, "bases": [{"kind": "lb"}, {"kind": "adapt", "sigma": 0.1}, {"kind": "heat"}]}"#,
        )
        .unwrap();
        c.apply(&Overrides {
            sigma: Some(0.02),
            q: Some(200),
            seed: Some(9),
            ..Default::default()
        });
        assert_eq!((c.k, c.seed), (40, 9));
        assert_eq!(c.bases[1].sigma, Some(0.02));
        assert_eq!(c.bases[2].sigma, None);
        assert_eq!(c.bases[2].q, Some(200));
        assert_eq!(c.bases[0].q, None);
        c.apply(&Overrides {
            basis: Some(BasisKind::Wave),
            k: Some(30),
            ..Default::default()
        });
        assert_eq!(
            c.bases.iter().map(|b| b.kind).collect::<Vec<_>>(),
            [BasisKind::Lb, BasisKind::Wave]
        );
        assert_eq!(c.k, 30);
    }

    #[test]
    fn validation_catches_bad_configs() {
        let parse = |s: &str| ExperimentConfig::from_json(s).unwrap().validate();
        assert!(
            parse(r#"{"pipeline": "zoomout", "k": 10, "k_ini": 16, "spectral_k": 100}"#).is_err()
        );
        assert!(parse(r#"{"pairs": [{"source": "/nonexistent/a.off", "target": "/nonexistent/b.off", "gt": "/nonexistent/gt.txt"}]}"#).is_err());
        assert!(parse(r#"{"bases": [{"kind": "lb"}, {"kind": "lb"}]}"#).is_err());
        assert!(parse(r#"{"bases": [{"kind": "lb"}, {"kind": "lb", "label": "lb2"}]}"#).is_ok());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut c = ExperimentConfig::from_json(
            r#"{"pairs": [{"source": "a.off", "target": "/abs/b.off"}], "out": "res"}"#,
        )
        .unwrap();
        c.resolve_paths(Path::new("/data/exp"));
        assert_eq!(c.pairs[0].source, Path::new("/data/exp/a.off"));
        assert_eq!(c.pairs[0].target, Path::new("/abs/b.off"));
        assert_eq!(c.out, Path::new("/data/exp/res"));
    }

    #[test]
    fn wks_defaults_to_the_complete_rank_policy() {
        assert_eq!(
            BasisSpec::new(BasisKind::Wks).rank_policy(),
            RankPolicy::Complete
        );
        assert_eq!(
            BasisSpec::new(BasisKind::Pcgau).rank_policy(),
            RankPolicy::Strict
        );
    }
}
