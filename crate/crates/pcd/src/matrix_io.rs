//! Binary matrix container with a JSON sidecar for bases, dictionaries and
//! functional maps.
//!
//! Layout: magic `PCDM`, `u32` version, `u64` rows, `u64` cols, then
//! `rows * cols` `f64` values in row-major order, all little-endian. The
//! sidecar sits next to it with the extension replaced by `.json`.

use std::fs;
use std::path::{Path, PathBuf};

use pcd_core::dictionary::{Recipe, RecipeParams};
use pcd_core::{Basis, BasisSource, Dictionary, FunctionalMap, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PCDM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for row in m.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a PCDM matrix file".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PCDM version {version}")));
    }
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!(
            "PCDM header says {rows}x{cols} but the file has {} bytes",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn save_matrix(m: &Matrix, path: &Path) -> Result<()> {
    fs::write(path, encode_matrix(m)).map_err(|e| Error::file(path, e))
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    decode_matrix(&fs::read(path).map_err(|e| Error::file(path, e))?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeMeta {
    pub recipe: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wks_energy_scales: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wks_variance_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<usize>>,
}

impl RecipeMeta {
    pub fn new(recipe: Recipe, params: &RecipeParams) -> Self {
        Self {
            recipe: recipe.name().to_string(),
            sigma: params.sigma,
            alpha: params.alpha,
            t: params.t,
            wks_energy_scales: params.wks.map(|w| w.energy_scale_count),
            wks_variance_factor: params.wks.map(|w| w.variance_factor),
            samples: params.samples.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub kind: String,
    /// `lb` or `pcd`.
    pub source: String,
    pub n: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<RecipeMeta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub kind: String,
    pub n: usize,
    pub q: usize,
    pub recipe: RecipeMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmapMeta {
    pub kind: String,
    pub k: usize,
    pub basis_source: BasisMeta,
    pub basis_target: BasisMeta,
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn basis_meta(basis: &Basis) -> BasisMeta {
    BasisMeta {
        kind: "basis".into(),
        source: match basis.source {
            BasisSource::Lb => "lb",
            BasisSource::Pcd => "pcd",
        }
        .into(),
        n: basis.vertex_count(),
        k: basis.k(),
        provenance: basis
            .provenance
            .as_ref()
            .map(|p| RecipeMeta::new(p.recipe, &p.params)),
        eigenvalues: basis.eigenvalues.clone(),
        singular_values: basis.singular_values.clone(),
    }
}

pub fn save_basis(basis: &Basis, path: &Path) -> Result<()> {
    save_matrix(&basis.atoms, path)?;
    write_json(&basis_meta(basis), &sidecar_path(path))
}

/// Reads the atoms and spectra back; the recipe record stays in the sidecar.
pub fn load_basis(path: &Path) -> Result<Basis> {
    let atoms = load_matrix(path)?;
    let meta: BasisMeta = read_json(&sidecar_path(path))?;
    if meta.n != atoms.nrows() || meta.k != atoms.ncols() {
        return Err(Error::Format(format!(
            "sidecar says {}x{} but the matrix is {}x{}",
            meta.n,
            meta.k,
            atoms.nrows(),
            atoms.ncols()
        )));
    }
    let source = match meta.source.as_str() {
        "lb" => BasisSource::Lb,
        "pcd" => BasisSource::Pcd,
        other => return Err(Error::Format(format!("unknown basis source {other:?}"))),
    };
    Ok(Basis {
        atoms,
        source,
        provenance: None,
        singular_values: meta.singular_values,
        eigenvalues: meta.eigenvalues,
    })
}

pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    save_matrix(&dict.atoms, path)?;
    let meta = DictionaryMeta {
        kind: "dictionary".into(),
        n: dict.vertex_count(),
        q: dict.q(),
        recipe: RecipeMeta::new(dict.recipe, &dict.params),
    };
    write_json(&meta, &sidecar_path(path))
}

pub fn save_fmap(
    fmap: &FunctionalMap,
    basis_source: &Basis,
    basis_target: &Basis,
    path: &Path,
) -> Result<()> {
    save_matrix(&fmap.c, path)?;
    let meta = FmapMeta {
        kind: "fmap".into(),
        k: fmap.k(),
        basis_source: basis_meta(basis_source),
        basis_target: basis_meta(basis_target),
    };
    write_json(&meta, &sidecar_path(path))
}

pub fn load_fmap(path: &Path) -> Result<FunctionalMap> {
    Ok(FunctionalMap {
        c: load_matrix(path)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcd_core::shapes;
    use pcd_core::spectral::{cotangent_laplacian, eigenbasis};

    #[test]
    fn header_layout() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..4], b"PCDM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        // row-major: the second value is m[(0, 1)]
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
        assert_eq!(decode_matrix(&bytes).unwrap(), m);
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let bytes = encode_matrix(&Matrix::identity(3, 3));
        assert!(decode_matrix(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_matrix(b"NOPE").is_err());
        let mut wrong = bytes.clone();
        wrong[4] = 9;
        assert!(decode_matrix(&wrong).is_err());
    }

    #[test]
    fn basis_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::icosphere(2);
        let basis = Basis::from(eigenbasis(&cotangent_laplacian(&mesh).unwrap(), 8).unwrap());
        let path = dir.path().join("lb.pcdm");
        save_basis(&basis, &path).unwrap();
        let back = load_basis(&path).unwrap();
        assert_eq!(back.atoms, basis.atoms);
        assert_eq!(back.eigenvalues, basis.eigenvalues);
        assert_eq!(back.source, BasisSource::Lb);
    }
}
