//! OFF, PLY and OBJ mesh readers and writers.
//!
//! Readers keep the vertex order of the file and fan-triangulate polygons.

use std::fs;
use std::io::Write;
use std::path::Path;

use pcd_core::TriMesh;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("off") => Ok(Self::Off),
            Some("ply") => Ok(Self::Ply),
            Some("obj") => Ok(Self::Obj),
            _ => Err(Error::Format(format!(
                "cannot tell the mesh format of {}",
                path.display()
            ))),
        }
    }
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    load_mesh_as(path, MeshFormat::from_path(path)?)
}

pub fn load_mesh_as(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_mesh(&bytes, format)
}

pub fn parse_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriMesh> {
    let (positions, polygons) = match format {
        MeshFormat::Off => parse_off(text(bytes)?)?,
        MeshFormat::Ply => parse_ply(bytes)?,
        MeshFormat::Obj => parse_obj(text(bytes)?)?,
    };
    let triangles = triangulate(&polygons, positions.len())?;
    Ok(TriMesh::new(positions, triangles)?)
}

fn text(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("mesh file is not UTF-8: {e}")))
}

type Polygons = Vec<Vec<usize>>;

/// Fan triangulation `(v0, vi, vi+1)`.
fn triangulate(polygons: &[Vec<usize>], n: usize) -> Result<Vec<[usize; 3]>> {
    let mut out = Vec::with_capacity(polygons.len());
    for (f, poly) in polygons.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::Format(format!(
                "face {f} has {} vertices",
                poly.len()
            )));
        }
        if let Some(&bad) = poly.iter().find(|&&v| v >= n) {
            return Err(pcd_core::Error::Topology(format!(
                "face {f} references vertex {bad} but the mesh has {n} vertices"
            ))
            .into());
        }
        for i in 1..poly.len() - 1 {
            out.push([poly[0], poly[i], poly[i + 1]]);
        }
    }
    Ok(out)
}

/// Whitespace tokens with their 1-based line numbers, `#` comments removed.
fn tokens(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines().enumerate().flat_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        line.split_whitespace().map(move |t| (i + 1, t))
    })
}

fn number<T: std::str::FromStr>(token: Option<(usize, &str)>, what: &str) -> Result<T> {
    let (line, t) = token.ok_or_else(|| Error::Format(format!("file ends before {what}")))?;
    t.parse()
        .map_err(|_| Error::parse(line, format!("expected {what}, found {t:?}")))
}

fn parse_off(src: &str) -> Result<(Vec<[f64; 3]>, Polygons)> {
    let mut it = tokens(src);
    match it.next() {
        Some((_, "OFF")) => {}
        Some((line, other)) => {
            return Err(Error::parse(
                line,
                format!("expected OFF header, found {other:?}"),
            ))
        }
        None => return Err(Error::Format("empty OFF file".into())),
    }
    let nv: usize = number(it.next(), "vertex count")?;
    let nf: usize = number(it.next(), "face count")?;
    let _edges: usize = number(it.next(), "edge count")?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        positions.push([
            number(it.next(), "x")?,
            number(it.next(), "y")?,
            number(it.next(), "z")?,
        ]);
    }
    // faces may carry trailing colour values, so read them line by line
    let mut polygons = Vec::with_capacity(nf);
    let mut pending = it.peekable();
    while polygons.len() < nf {
        let (line, t) = pending.next().ok_or_else(|| {
            Error::Format(format!("OFF file has {} of {nf} faces", polygons.len()))
        })?;
        let count: usize = t
            .parse()
            .map_err(|_| Error::parse(line, format!("expected face size, found {t:?}")))?;
        let mut poly = Vec::with_capacity(count);
        for _ in 0..count {
            poly.push(number(pending.next(), "face index")?);
        }
        while pending.peek().is_some_and(|(l, _)| *l == line) {
            pending.next();
        }
        polygons.push(poly);
    }
    Ok((positions, polygons))
}

fn parse_obj(src: &str) -> Result<(Vec<[f64; 3]>, Polygons)> {
    let mut positions = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line_no = i + 1;
        let mut parts = line.split('#').next().unwrap_or("").split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    *c = number(parts.next().map(|t| (line_no, t)), "vertex coordinate")?;
                }
                positions.push(p);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in parts {
                    // v, v/vt, v//vn or v/vt/vn
                    let head = t.split('/').next().unwrap_or("");
                    poly.push(number(Some((line_no, head)), "face index")?);
                }
                faces.push((line_no, poly));
            }
            _ => {}
        }
    }
    let n = positions.len() as i64;
    let mut polygons = Vec::with_capacity(faces.len());
    for (line, poly) in faces {
        let resolved = poly
            .into_iter()
            .map(|v| {
                let idx = if v < 0 { n + v } else { v - 1 };
                if v == 0 || idx < 0 || idx >= n {
                    Err(pcd_core::Error::Topology(format!(
                        "line {line}: face index {v} out of range"
                    ))
                    .into())
                } else {
                    Ok(idx as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        polygons.push(resolved);
    }
    Ok((positions, polygons))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    LittleEndian,
    BigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Sequential reader over the body of a PLY file.
struct Body<'a> {
    bytes: &'a [u8],
    pos: usize,
    encoding: Encoding,
}

impl Body<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64> {
        if self.encoding == Encoding::Ascii {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(Error::Format("PLY body ends early".into()));
            }
            let token = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
            return token
                .parse()
                .map_err(|_| Error::Format(format!("bad PLY value {token:?}")));
        }
        let size = ty.size();
        let raw = self
            .bytes
            .get(self.pos..self.pos + size)
            .ok_or_else(|| Error::Format("PLY body ends early".into()))?;
        self.pos += size;
        let mut buf = [0u8; 8];
        buf[..size].copy_from_slice(raw);
        if self.encoding == Encoding::BigEndian {
            buf[..size].reverse();
        }
        Ok(match ty {
            Scalar::I8 => i8::from_le_bytes([buf[0]]) as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

fn index_value(v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Format(format!("bad vertex index {v}")));
    }
    Ok(v as usize)
}

fn parse_ply(bytes: &[u8]) -> Result<(Vec<[f64; 3]>, Polygons)> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Format("PLY header has no end_header".into()))?;
    let mut body_start = end + END.len();
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = text(&bytes[..end])?;

    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in header.lines().enumerate() {
        let line_no = i + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, _version] => {
                encoding = Some(match *kind {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::LittleEndian,
                    "binary_big_endian" => Encoding::BigEndian,
                    other => {
                        return Err(Error::parse(line_no, format!("unknown PLY format {other}")))
                    }
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad element count {count:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, name] => {
                let (c, t) = (Scalar::parse(count_ty), Scalar::parse(item_ty));
                let (Some(c), Some(t)) = (c, t) else {
                    return Err(Error::parse(line_no, "unknown PLY list type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(line_no, "property before element"))?
                    .properties
                    .push(Property::List(name.to_string(), c, t));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(line_no, format!("unknown PLY type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(line_no, "property before element"))?
                    .properties
                    .push(Property::Scalar(name.to_string(), ty));
            }
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("unexpected PLY header line {line:?}"),
                ))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Format("PLY header has no format line".into()))?;

    let mut body = Body {
        bytes,
        pos: body_start.min(bytes.len()),
        encoding,
    };
    let mut positions = Vec::new();
    let mut polygons = Vec::new();
    for element in &elements {
        let axis = |name: &str| {
            element
                .properties
                .iter()
                .position(|p| matches!(p, Property::Scalar(n, _) if n == name))
        };
        let xyz = [axis("x"), axis("y"), axis("z")];
        let is_vertex = element.name == "vertex";
        let is_face = element.name == "face";
        if is_vertex && xyz.iter().any(Option::is_none) {
            return Err(Error::Format("PLY vertex element lacks x, y or z".into()));
        }
        for _ in 0..element.count {
            let mut p = [0.0; 3];
            for (j, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => {
                        let v = body.read(*ty)?;
                        if let Some(c) = xyz.iter().position(|&a| a == Some(j)) {
                            p[c] = v;
                        }
                    }
                    Property::List(name, count_ty, item_ty) => {
                        let count = index_value(body.read(*count_ty)?)?;
                        let mut poly = Vec::with_capacity(count);
                        for _ in 0..count {
                            poly.push(index_value(body.read(*item_ty)?)?);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            polygons.push(poly);
                        }
                    }
                }
            }
            if is_vertex {
                positions.push(p);
            }
        }
    }
    Ok((positions, polygons))
}

/// ASCII OFF; coordinates use the shortest representation that reads back
/// to the same `f64`.
pub fn write_off(mesh: &TriMesh, out: &mut impl Write) -> Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.triangle_count())?;
    for p in mesh.positions() {
        writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn save_off(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_off(mesh, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::file(path, e))
}

/// ASCII PLY with one `quality` scalar per vertex, for colour-mapped display.
pub fn write_ply_quality(mesh: &TriMesh, quality: &[f64], out: &mut impl Write) -> Result<()> {
    if quality.len() != mesh.vertex_count() {
        return Err(pcd_core::Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: quality.len(),
        }
        .into());
    }
    writeln!(out, "ply\nformat ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    writeln!(
        out,
        "property double x\nproperty double y\nproperty double z\nproperty double quality"
    )?;
    writeln!(out, "element face {}", mesh.triangle_count())?;
    writeln!(out, "property list uchar int vertex_indices\nend_header")?;
    for (p, q) in mesh.positions().iter().zip(quality) {
        writeln!(out, "{:?} {:?} {:?} {:?}", p[0], p[1], p[2], q)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn save_ply_quality(mesh: &TriMesh, quality: &[f64], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_ply_quality(mesh, quality, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcd_core::shapes;

    const TRIANGLE_OFF: &str = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn single_triangle_off() {
        let mesh = parse_mesh(TRIANGLE_OFF.as_bytes(), MeshFormat::Off).unwrap();
        assert_eq!(
            (
                mesh.vertex_count(),
                mesh.triangle_count(),
                mesh.edges().len()
            ),
            (3, 1, 3)
        );
    }

    #[test]
    fn tetrahedron_off_with_comments_and_colours() {
        let src = "OFF # tetra\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n\
                   3 0 1 2 255 0 0\n3 0 3 1\n3 0 2 3\n3 1 3 2 # last\n";
        let mesh = parse_mesh(src.as_bytes(), MeshFormat::Off).unwrap();
        assert_eq!(
            (
                mesh.vertex_count(),
                mesh.triangle_count(),
                mesh.edges().len()
            ),
            (4, 4, 6)
        );
    }

    #[test]
    fn out_of_range_index_is_a_topology_error() {
        let src = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n";
        let err = parse_mesh(src.as_bytes(), MeshFormat::Off).unwrap_err();
        assert!(
            matches!(err, Error::Core(pcd_core::Error::Topology(_))),
            "{err}"
        );
    }

    #[test]
    fn malformed_off_is_a_parse_error() {
        let src = "OFF\n3 1 0\n0 0 zero\n";
        assert!(matches!(
            parse_mesh(src.as_bytes(), MeshFormat::Off),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n";
        let mesh = parse_mesh(src.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        let negative = "v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n";
        let mesh = parse_mesh(negative.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn off_round_trip_is_bit_exact() {
        let mesh = shapes::LimbedFigure::new(1, 4).mesh;
        let mut buf = Vec::new();
        write_off(&mesh, &mut buf).unwrap();
        let back = parse_mesh(&buf, MeshFormat::Off).unwrap();
        assert_eq!(back.positions(), mesh.positions());
        assert_eq!(back.triangles(), mesh.triangles());
    }

    fn binary_ply(big_endian: bool) -> Vec<u8> {
        let format = if big_endian {
            "binary_big_endian"
        } else {
            "binary_little_endian"
        };
        let mut out = format!(
            "ply\nformat {format} 1.0\ncomment made by hand\nelement vertex 3\nproperty float x\n\
             property float y\nproperty float z\nproperty uchar red\nelement face 1\n\
             property list uchar int vertex_indices\nend_header\n"
        )
        .into_bytes();
        for (p, red) in [
            ([0.0f32, 0.0, 0.0], 1u8),
            ([1.0, 0.0, 0.0], 2),
            ([0.0, 1.0, 0.0], 3),
        ] {
            for c in p {
                out.extend(if big_endian {
                    c.to_be_bytes()
                } else {
                    c.to_le_bytes()
                });
            }
            out.push(red);
        }
        out.push(3);
        for i in [0i32, 1, 2] {
            out.extend(if big_endian {
                i.to_be_bytes()
            } else {
                i.to_le_bytes()
            });
        }
        out
    }

    #[test]
    fn binary_and_ascii_ply_agree() {
        let ascii = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
                     property double z\nelement face 1\nproperty list uchar int vertex_index\nend_header\n\
                     0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let a = parse_mesh(ascii.as_bytes(), MeshFormat::Ply).unwrap();
        for big in [false, true] {
            let b = parse_mesh(&binary_ply(big), MeshFormat::Ply).unwrap();
            assert_eq!(a.positions(), b.positions());
            assert_eq!(a.triangles(), b.triangles());
        }
    }

    #[test]
    fn quality_ply_reads_back() {
        let mesh = shapes::icosphere(1);
        let quality: Vec<f64> = (0..mesh.vertex_count()).map(|i| i as f64 * 0.5).collect();
        let mut buf = Vec::new();
        write_ply_quality(&mesh, &quality, &mut buf).unwrap();
        let back = parse_mesh(&buf, MeshFormat::Ply).unwrap();
        assert_eq!(back.positions(), mesh.positions());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            MeshFormat::from_path(Path::new("a/b.PLY")).unwrap(),
            MeshFormat::Ply
        );
        assert!(MeshFormat::from_path(Path::new("a/b.stl")).is_err());
    }
}
