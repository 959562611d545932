//! Plain-text vertex index files: point-wise maps, ground truth, landmarks
//! and sample sets. Indices are 0-based unless `one_based` is set on input;
//! output is always 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pcd_core::geodesic::{SampleSet, SamplingMethod};
use pcd_core::{GroundTruth, Landmarks, PointwiseMap};

use crate::error::{Error, Result};

/// Non-empty, non-comment lines split into integer fields.
fn rows(src: &str, one_based: bool) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                let v: i64 = t
                    .parse()
                    .or_else(|_| t.parse::<f64>().map(|f| f as i64).map_err(|_| ()))
                    .map_err(|_| {
                        Error::parse(i + 1, format!("expected a vertex index, found {t:?}"))
                    })?;
                let v = if one_based { v - 1 } else { v };
                if v < 0 {
                    return Err(Error::parse(i + 1, format!("negative vertex index {t}")));
                }
                Ok(v as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// One target index per line; line `i` is the image of source vertex `i`.
pub fn parse_map(src: &str, one_based: bool, target_count: usize) -> Result<PointwiseMap> {
    let mut assignment = Vec::new();
    for (line, fields) in rows(src, one_based)? {
        if fields.len() != 1 {
            return Err(Error::parse(line, "map lines hold exactly one index"));
        }
        assignment.push(fields[0]);
    }
    Ok(PointwiseMap::new(assignment, target_count)?)
}

pub fn read_map(path: &Path, one_based: bool, target_count: usize) -> Result<PointwiseMap> {
    parse_map(&read(path)?, one_based, target_count)
}

pub fn format_map(map: &PointwiseMap) -> String {
    let mut out = String::with_capacity(8 * map.source_count());
    for v in map.assignment() {
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn write_map(map: &PointwiseMap, path: &Path) -> Result<()> {
    fs::write(path, format_map(map)).map_err(|e| Error::file(path, e))
}

/// Ground truth in either layout: one index per line (dense, line `i` is
/// the image of vertex `i`) or two per line (sparse `source target` pairs).
pub fn parse_ground_truth(
    src: &str,
    one_based: bool,
    source_count: usize,
    target_count: usize,
) -> Result<GroundTruth> {
    let rows = rows(src, one_based)?;
    let width = rows.first().map_or(1, |r| r.1.len());
    if let Some((line, _)) = rows.iter().find(|r| r.1.len() != width) {
        return Err(Error::parse(
            *line,
            "ground-truth lines must all have the same number of indices",
        ));
    }
    match width {
        1 => {
            if rows.len() != source_count {
                return Err(Error::Format(format!(
                    "dense ground truth has {} lines for {source_count} source vertices",
                    rows.len()
                )));
            }
            let map = PointwiseMap::new(rows.into_iter().map(|r| r.1[0]).collect(), target_count)?;
            Ok(GroundTruth::dense(&map))
        }
        2 => Ok(GroundTruth::sparse(
            rows.into_iter().map(|r| (r.1[0], r.1[1])).collect(),
            source_count,
            target_count,
        )?),
        _ => Err(Error::Format(
            "ground-truth lines hold one or two indices".into(),
        )),
    }
}

pub fn read_ground_truth(
    path: &Path,
    one_based: bool,
    source_count: usize,
    target_count: usize,
) -> Result<GroundTruth> {
    parse_ground_truth(&read(path)?, one_based, source_count, target_count)
}

/// Two indices per line: vertex on the source `N`, vertex on the target `M`.
pub fn parse_landmarks(
    src: &str,
    one_based: bool,
    source_count: usize,
    target_count: usize,
) -> Result<Landmarks> {
    let mut pairs = Vec::new();
    for (line, fields) in rows(src, one_based)? {
        if fields.len() != 2 {
            return Err(Error::parse(line, "landmark lines hold two indices"));
        }
        pairs.push((fields[0], fields[1]));
    }
    Ok(Landmarks::new(pairs, source_count, target_count)?)
}

pub fn read_landmarks(
    path: &Path,
    one_based: bool,
    source_count: usize,
    target_count: usize,
) -> Result<Landmarks> {
    parse_landmarks(&read(path)?, one_based, source_count, target_count)
}

pub fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
}

pub fn write_samples(samples: &SampleSet, path: &Path) -> Result<()> {
    let text: String = samples.indices().iter().map(|v| format!("{v}\n")).collect();
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// One vertex index per line.
pub fn parse_indices(src: &str, one_based: bool) -> Result<Vec<usize>> {
    let mut indices = Vec::new();
    for (line, fields) in rows(src, one_based)? {
        if fields.len() != 1 {
            return Err(Error::parse(line, "expected exactly one index per line"));
        }
        indices.push(fields[0]);
    }
    Ok(indices)
}

pub fn read_indices(path: &Path, one_based: bool) -> Result<Vec<usize>> {
    parse_indices(&read(path)?, one_based)
}

pub fn read_samples(path: &Path, vertex_count: usize) -> Result<SampleSet> {
    // the sampling method is not recorded in the file
    Ok(SampleSet::new(
        read_indices(path, false)?,
        SamplingMethod::Random,
        vertex_count,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_based_maps_shift_down() {
        let map = parse_map("1\n3\n2\n", true, 3).unwrap();
        assert_eq!(map.assignment(), &[0, 2, 1]);
        assert!(parse_map("0\n", true, 3).is_err());
        assert!(parse_map("3\n", false, 3).is_err());
    }

    #[test]
    fn map_round_trip() {
        let map = PointwiseMap::new(vec![4, 0, 2, 2], 5).unwrap();
        assert_eq!(parse_map(&format_map(&map), false, 5).unwrap(), map);
    }

    #[test]
    fn ground_truth_layouts() {
        let dense = parse_ground_truth("# header\n1\n0\n", false, 2, 2).unwrap();
        assert_eq!(dense.pairs(), &[(0, 1), (1, 0)]);
        let sparse = parse_ground_truth("5 1\n7 0\n", false, 10, 2).unwrap();
        assert_eq!(sparse.len(), 2);
        assert!(parse_ground_truth("1\n0 1\n", false, 2, 2).is_err());
        assert!(parse_ground_truth("1\n", false, 2, 2).is_err());
    }

    #[test]
    fn landmarks_reject_repeated_source_vertices() {
        assert!(parse_landmarks("0 1\n2 3\n", false, 4, 4).is_ok());
        assert!(parse_landmarks("0 1\n0 3\n", false, 4, 4).is_err());
        assert!(parse_landmarks("0 1 2\n", false, 4, 4).is_err());
    }
}
