//! Asset and result file I/O.
//!
//! Formats follow the BOP dataset conventions: millimeter units
//! everywhere, result CSV with `scene_id,im_id,obj_id,score,R,t,time`
//! (9 respectively 3 space-separated floats inside the `R` and `t` cells),
//! `scene_gt.json` / `scene_camera.json` keyed by image id, and 16-bit
//! depth PNG at 0.1 mm per unit. Floats are written with 15 significant
//! digits, which round-trips exactly back through a read.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose, Rotation};
use crate::render::DepthMap;
use crate::symlabels::{Mesh, SymmetrySet, SymmetryTransform};

/// Orthonormality tolerance for rotations in result files.
const RESULT_ROT_TOL: f64 = 1e-4;
/// Orthonormality tolerance for rotations in symmetry files.
const SYMMETRY_ROT_TOL: f64 = 1e-3;
/// Default discretization of continuous symmetries.
pub const DEFAULT_SYMMETRY_STEPS: u32 = 36;

/// 15-significant-digit float formatting used in every text output.
pub(crate) fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.14e}")
}

fn parse_float(location: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|e| Error::parse(location, format!("bad float {s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::parse(location, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// meshes

/// Load a mesh from PLY (ASCII or binary little endian) or OBJ, chosen by
/// file extension (`.obj` for OBJ, anything else tries PLY).
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let bytes = fs::read(path)?;
    let loc = path.display().to_string();
    if path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("obj"))
        .unwrap_or(false)
    {
        parse_obj(&loc, &bytes)
    } else {
        parse_ply(&loc, &bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyScalar {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "float" | "float32" => Some(PlyScalar::F32),
            "double" | "float64" => Some(PlyScalar::F64),
            "char" | "int8" => Some(PlyScalar::I8),
            "uchar" | "uint8" => Some(PlyScalar::U8),
            "short" | "int16" => Some(PlyScalar::I16),
            "ushort" | "uint16" => Some(PlyScalar::U16),
            "int" | "int32" => Some(PlyScalar::I32),
            "uint" | "uint32" => Some(PlyScalar::U32),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            PlyScalar::I8 | PlyScalar::U8 => 1,
            PlyScalar::I16 | PlyScalar::U16 => 2,
            PlyScalar::F32 | PlyScalar::I32 | PlyScalar::U32 => 4,
            PlyScalar::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            PlyScalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyScalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            PlyScalar::I8 => bytes[0] as i8 as f64,
            PlyScalar::U8 => bytes[0] as f64,
            PlyScalar::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            PlyScalar::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            PlyScalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyScalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar {
        name: String,
        ty: PlyScalar,
    },
    List {
        name: String,
        count: PlyScalar,
        item: PlyScalar,
    },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn parse_ply(loc: &str, bytes: &[u8]) -> Result<Mesh> {
    // header is ASCII lines up to end_header
    let header_end =
        find_header_end(bytes).ok_or_else(|| Error::parse(loc, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::parse(loc, "header is not valid ASCII"))?;
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(loc, "missing ply magic on line 1")),
    }
    let mut format = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        let human = format!("{loc}:{}", lineno + 1);
        if line.is_empty() || line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        if line == "end_header" {
            break;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = match tok.next() {
                    Some("ascii") => Some(PlyFormat::Ascii),
                    Some("binary_little_endian") => Some(PlyFormat::BinaryLe),
                    other => {
                        return Err(Error::parse(human, format!("unsupported format {other:?}")))
                    }
                };
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(&human, "element without a name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(&human, "element without a count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(&human, "property before any element"))?;
                let first = tok
                    .next()
                    .ok_or_else(|| Error::parse(&human, "property without a type"))?;
                if first == "list" {
                    let count = tok.next().and_then(PlyScalar::parse).ok_or_else(|| {
                        Error::parse(&human, "list property with unknown count type")
                    })?;
                    let item = tok.next().and_then(PlyScalar::parse).ok_or_else(|| {
                        Error::parse(&human, "list property with unknown item type")
                    })?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(&human, "list property without a name"))?;
                    element.properties.push(PlyProperty::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = PlyScalar::parse(first).ok_or_else(|| {
                        Error::parse(&human, format!("unknown property type {first:?}"))
                    })?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(&human, "property without a name"))?;
                    element.properties.push(PlyProperty::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            other => {
                return Err(Error::parse(
                    human,
                    format!("unexpected header keyword {other:?}"),
                ))
            }
        }
    }
    let format = format.ok_or_else(|| Error::parse(loc, "header has no format line"))?;
    let body = &bytes[header_end..];
    match format {
        PlyFormat::Ascii => parse_ply_ascii(loc, body, &elements),
        PlyFormat::BinaryLe => parse_ply_binary(loc, body, &elements),
    }
}

/// Byte offset just past the `end_header` line, scanning whole lines so a
/// comment mentioning the keyword cannot truncate the header.
fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let mut start = 0;
    while start < bytes.len() {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p)
            .unwrap_or(bytes.len());
        let line = &bytes[start..end];
        let trimmed: &[u8] = match line.last() {
            Some(b'\r') => &line[..line.len() - 1],
            _ => line,
        };
        if trimmed == b"end_header" {
            return Some((end + 1).min(bytes.len()));
        }
        start = end + 1;
    }
    None
}

struct MeshBuilder {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    fn push_face(&mut self, loc: &str, indices: &[i64]) -> Result<()> {
        if indices.len() < 3 {
            return Err(Error::parse(
                loc,
                format!("face with {} vertices", indices.len()),
            ));
        }
        let n = self.vertices.len() as i64;
        for &i in indices {
            if i < 0 || i >= n {
                return Err(Error::parse(loc, format!("vertex index {i} out of range")));
            }
        }
        // fan triangulation
        for k in 1..indices.len() - 1 {
            self.triangles
                .push([indices[0] as u32, indices[k] as u32, indices[k + 1] as u32]);
        }
        Ok(())
    }

    fn finish(self) -> Result<Mesh> {
        Mesh::new(self.vertices, self.triangles)
    }
}

fn parse_ply_ascii(loc: &str, body: &[u8], elements: &[PlyElement]) -> Result<Mesh> {
    let text = std::str::from_utf8(body).map_err(|_| Error::parse(loc, "body is not ASCII"))?;
    let mut rows = text.lines().filter(|l| !l.trim().is_empty());
    let mut mesh = MeshBuilder::new();
    for element in elements {
        for row in 0..element.count {
            let human = format!("{loc} element {} row {row}", element.name);
            let line = rows
                .next()
                .ok_or_else(|| Error::parse(&human, "unexpected end of file"))?;
            let mut tok = line.split_whitespace();
            let mut xyz = [f64::NAN; 3];
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { name, .. } => {
                        let raw = tok
                            .next()
                            .ok_or_else(|| Error::parse(&human, "missing property value"))?;
                        let v = parse_float(&human, raw)?;
                        match (element.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = v,
                            ("vertex", "y") => xyz[1] = v,
                            ("vertex", "z") => xyz[2] = v,
                            _ => {} // unknown properties are skipped
                        }
                    }
                    PlyProperty::List { name, .. } => {
                        let count = tok
                            .next()
                            .and_then(|c| c.parse::<usize>().ok())
                            .ok_or_else(|| Error::parse(&human, "missing list count"))?;
                        let mut items = Vec::with_capacity(count);
                        for _ in 0..count {
                            let raw = tok
                                .next()
                                .ok_or_else(|| Error::parse(&human, "truncated list"))?;
                            items.push(raw.parse::<i64>().map_err(|e| {
                                Error::parse(&human, format!("bad index {raw:?}: {e}"))
                            })?);
                        }
                        if element.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index")
                        {
                            mesh.push_face(&human, &items)?;
                        }
                    }
                }
            }
            if element.name == "vertex" {
                if xyz.iter().any(|v| v.is_nan()) {
                    return Err(Error::parse(&human, "vertex without x/y/z"));
                }
                mesh.vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    mesh.finish()
}

fn parse_ply_binary(loc: &str, body: &[u8], elements: &[PlyElement]) -> Result<Mesh> {
    let mut offset = 0usize;
    let mut mesh = MeshBuilder::new();
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if offset + n > body.len() {
            return Err(Error::parse(
                format!("{loc} byte {offset}"),
                format!("truncated while reading {what}"),
            ));
        }
        let s = &body[offset..offset + n];
        offset += n;
        Ok(s)
    };
    for element in elements {
        for row in 0..element.count {
            let human = format!("{loc} element {} row {row}", element.name);
            let mut xyz = [f64::NAN; 3];
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { name, ty } => {
                        let raw = take(ty.size(), &format!("{} {}", element.name, name))?;
                        let v = ty.read_le(raw);
                        match (element.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = v,
                            ("vertex", "y") => xyz[1] = v,
                            ("vertex", "z") => xyz[2] = v,
                            _ => {}
                        }
                    }
                    PlyProperty::List { name, count, item } => {
                        let what = format!("{} {name} list", element.name);
                        let raw = take(count.size(), &what)?;
                        let n = count.read_le(raw) as usize;
                        let raw = take(n * item.size(), &what)?;
                        if element.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index")
                        {
                            let items: Vec<i64> = (0..n)
                                .map(|i| item.read_le(&raw[i * item.size()..]) as i64)
                                .collect();
                            mesh.push_face(&human, &items)?;
                        }
                    }
                }
            }
            if element.name == "vertex" {
                if xyz.iter().any(|v| v.is_nan()) {
                    return Err(Error::parse(&human, "vertex without finite x/y/z"));
                }
                mesh.vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    mesh.finish()
}

fn parse_obj(loc: &str, bytes: &[u8]) -> Result<Mesh> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| Error::parse(loc, "OBJ is not valid UTF-8"))?;
    let mut mesh = MeshBuilder::new();
    for (lineno, line) in text.lines().enumerate() {
        let human = format!("{loc}:{}", lineno + 1);
        let line = line.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let raw = tok
                        .next()
                        .ok_or_else(|| Error::parse(&human, "vertex with fewer than 3 coords"))?;
                    *c = parse_float(&human, raw)?;
                }
                mesh.vertices
                    .push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for part in tok {
                    // v, v/vt, v/vt/vn, v//vn all start with the vertex index
                    let head = part.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|e| {
                        Error::parse(&human, format!("bad face index {part:?}: {e}"))
                    })?;
                    let resolved = if idx < 0 {
                        mesh.vertices.len() as i64 + idx
                    } else {
                        idx - 1 // OBJ indices are 1-based
                    };
                    indices.push(resolved);
                }
                mesh.push_face(&human, &indices)?;
            }
            _ => {} // normals, texcoords, groups, comments
        }
    }
    mesh.finish()
}

// ---------------------------------------------------------------------------
// symmetries

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SymmetryEntry {
    #[serde(rename = "R")]
    rot: Option<Vec<f64>>,
    t: Option<Vec<f64>>,
    axis: Option<Vec<f64>>,
    offset: Option<Vec<f64>>,
    steps: Option<u32>,
}

fn matrix_from_row_major(loc: &str, values: &[f64]) -> Result<Matrix3<f64>> {
    if values.len() != 9 {
        return Err(Error::parse(
            loc,
            format!("R has {} floats, expected 9", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(loc, "R has non-finite entries"));
    }
    Ok(Matrix3::from_row_slice(values))
}

fn vector_from_slice(loc: &str, values: &[f64], what: &str) -> Result<Vector3<f64>> {
    if values.len() != 3 {
        return Err(Error::parse(
            loc,
            format!("{what} has {} floats, expected 3", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(loc, format!("{what} has non-finite entries")));
    }
    Ok(Vector3::new(values[0], values[1], values[2]))
}

/// Check a claimed rotation against `tol` and snap it to the nearest exact
/// rotation.
fn rotation_from_checked(loc: &str, m: &Matrix3<f64>, tol: f64) -> Result<Rotation> {
    let defect = (m.transpose() * m - Matrix3::identity())
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let det = m.determinant();
    if defect > tol || (det - 1.0).abs() > 10.0 * tol {
        return Err(Error::NonRigid(format!(
            "{loc}: orthonormality defect {defect:.2e}, det {det:.6}"
        )));
    }
    Rotation::nearest(m)
}

/// Load a symmetry spec: a JSON array of discrete `{R, t}` transforms and
/// continuous `{axis, offset}` entries, the latter discretized into
/// `continuous_steps` rotations (an entry-level `steps` field overrides).
/// The identity is always prepended.
pub fn load_symmetries(path: &Path, continuous_steps: u32) -> Result<SymmetrySet> {
    let loc = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let entries: Vec<SymmetryEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&loc, format!("invalid JSON: {e}")))?;
    let mut set = SymmetrySet::identity();
    for (i, entry) in entries.iter().enumerate() {
        let human = format!("{loc} entry {i}");
        match (&entry.rot, &entry.axis) {
            (Some(rot), None) => {
                let m = matrix_from_row_major(&human, rot)?;
                let rotation = rotation_from_checked(&human, &m, SYMMETRY_ROT_TOL)?;
                let translation = match &entry.t {
                    Some(t) => vector_from_slice(&human, t, "t")?,
                    None => Vector3::zeros(),
                };
                set.push_transform(SymmetryTransform {
                    rotation,
                    translation,
                });
            }
            (None, Some(axis)) => {
                let axis = vector_from_slice(&human, axis, "axis")?;
                let offset = match &entry.offset {
                    Some(o) => vector_from_slice(&human, o, "offset")?,
                    None => Vector3::zeros(),
                };
                let steps = entry.steps.unwrap_or(continuous_steps);
                set.extend_discretized_axis(&axis, &offset, steps)?;
            }
            _ => {
                return Err(Error::parse(
                    human,
                    "entry must have either R (+ optional t) or axis (+ optional offset)",
                ))
            }
        }
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// results CSV

/// One estimate row of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scene_id: u32,
    pub im_id: u32,
    pub obj_id: u32,
    pub score: f64,
    pub pose: Pose,
    pub time_s: f64,
}

const RESULT_HEADER: &str = "scene_id,im_id,obj_id,score,R,t,time";

/// Read a results CSV. Rotations must be orthonormal within 1e-4 and are
/// snapped to exact rotations.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let loc = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == RESULT_HEADER => {}
        Some((n, l)) => {
            return Err(Error::parse(
                format!("{loc}:{}", n + 1),
                format!("bad header {l:?}, expected {RESULT_HEADER:?}"),
            ))
        }
        None => return Err(Error::parse(&loc, "empty file, expected a header")),
    }
    for (lineno, line) in lines {
        let row_no = lineno + 1;
        let human = format!("{loc}:{row_no}");
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::FieldCount {
                row: row_no,
                cell: "row".into(),
                expected: 7,
                got: fields.len(),
            });
        }
        let id = |s: &str, what: &str| -> Result<u32> {
            s.trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(&human, format!("bad {what} {s:?}: {e}")))
        };
        let scene_id = id(fields[0], "scene_id")?;
        let im_id = id(fields[1], "im_id")?;
        let obj_id = id(fields[2], "obj_id")?;
        let score = parse_float(&human, fields[3])?;
        let rot_values: Vec<f64> = fields[4]
            .split_whitespace()
            .map(|s| parse_float(&human, s))
            .collect::<Result<_>>()?;
        if rot_values.len() != 9 {
            return Err(Error::FieldCount {
                row: row_no,
                cell: "R".into(),
                expected: 9,
                got: rot_values.len(),
            });
        }
        let t_values: Vec<f64> = fields[5]
            .split_whitespace()
            .map(|s| parse_float(&human, s))
            .collect::<Result<_>>()?;
        if t_values.len() != 3 {
            return Err(Error::FieldCount {
                row: row_no,
                cell: "t".into(),
                expected: 3,
                got: t_values.len(),
            });
        }
        let time_s = parse_float(&human, fields[6])?;
        let m = Matrix3::from_row_slice(&rot_values);
        let rotation = rotation_from_checked(&human, &m, RESULT_ROT_TOL)?;
        rows.push(ResultRow {
            scene_id,
            im_id,
            obj_id,
            score,
            pose: Pose::new(
                rotation,
                Vector3::new(t_values[0], t_values[1], t_values[2]),
            ),
            time_s,
        });
    }
    Ok(rows)
}

/// Write a results CSV; output is byte-stable across runs and platforms.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_results_to(&mut w, rows)
}

pub fn write_results_to<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<()> {
    writeln!(w, "{RESULT_HEADER}")?;
    for row in rows {
        let m = row.pose.rotation.matrix();
        let rot = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| format_float(m[(r, c)]))
            .collect::<Vec<_>>()
            .join(" ");
        let t = [
            row.pose.translation.x,
            row.pose.translation.y,
            row.pose.translation.z,
        ]
        .map(format_float)
        .join(" ");
        writeln!(
            w,
            "{},{},{},{},{rot},{t},{}",
            row.scene_id,
            row.im_id,
            row.obj_id,
            format_float(row.score),
            format_float(row.time_s)
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scene ground truth

/// One ground-truth instance joined with its camera.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub im_id: u32,
    pub obj_id: u32,
    pub pose: Pose,
    pub cam: CameraIntrinsics,
}

#[derive(Deserialize)]
struct GtEntry {
    #[serde(rename = "cam_R_m2c")]
    cam_rot: Vec<f64>,
    #[serde(rename = "cam_t_m2c")]
    cam_t: Vec<f64>,
    obj_id: u32,
}

#[derive(Deserialize)]
struct CameraEntry {
    #[serde(rename = "cam_K")]
    cam_k: Vec<f64>,
    width: Option<u32>,
    height: Option<u32>,
    #[serde(default, rename = "depth_scale")]
    _depth_scale: Option<f64>,
}

/// Image size assumed when the camera file does not carry one.
pub const DEFAULT_IMAGE_SIZE: (u32, u32) = (640, 480);

/// Read `scene_gt.json` joined with `scene_camera.json`, ordered by image
/// id then by in-image instance order.
pub fn read_scene_gt(gt_path: &Path, camera_path: &Path) -> Result<Vec<GtInstance>> {
    let gt_loc = gt_path.display().to_string();
    let cam_loc = camera_path.display().to_string();
    let gt_text = fs::read_to_string(gt_path)?;
    let cam_text = fs::read_to_string(camera_path)?;
    let gt: BTreeMap<String, Vec<GtEntry>> = serde_json::from_str(&gt_text)
        .map_err(|e| Error::parse(&gt_loc, format!("invalid JSON: {e}")))?;
    let cams: BTreeMap<String, CameraEntry> = serde_json::from_str(&cam_text)
        .map_err(|e| Error::parse(&cam_loc, format!("invalid JSON: {e}")))?;

    let mut out = Vec::new();
    let mut images: Vec<(u32, &Vec<GtEntry>)> = Vec::new();
    for (key, entries) in &gt {
        let im_id: u32 = key
            .parse()
            .map_err(|e| Error::parse(&gt_loc, format!("bad image id {key:?}: {e}")))?;
        images.push((im_id, entries));
    }
    images.sort_by_key(|(id, _)| *id);

    for (im_id, entries) in images {
        let cam_entry = cams
            .get(&im_id.to_string())
            .ok_or(Error::MissingCamera(im_id))?;
        if cam_entry.cam_k.len() != 9 {
            return Err(Error::parse(
                &cam_loc,
                format!(
                    "cam_K for image {im_id} has {} floats",
                    cam_entry.cam_k.len()
                ),
            ));
        }
        if cam_entry.cam_k.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(
                &cam_loc,
                format!("cam_K for image {im_id} has non-finite entries"),
            ));
        }
        let k = &cam_entry.cam_k;
        let (width, height) = (
            cam_entry.width.unwrap_or(DEFAULT_IMAGE_SIZE.0),
            cam_entry.height.unwrap_or(DEFAULT_IMAGE_SIZE.1),
        );
        let cam = CameraIntrinsics::new(k[0], k[4], k[2], k[5], width, height)?;
        for (i, entry) in entries.iter().enumerate() {
            let human = format!("{gt_loc} image {im_id} instance {i}");
            if entry.cam_rot.iter().any(|v| !v.is_finite())
                || entry.cam_t.iter().any(|v| !v.is_finite())
            {
                return Err(Error::parse(&human, "non-finite pose entries"));
            }
            let m = matrix_from_row_major(&human, &entry.cam_rot)?;
            let rotation = rotation_from_checked(&human, &m, RESULT_ROT_TOL)?;
            let t = vector_from_slice(&human, &entry.cam_t, "cam_t_m2c")?;
            out.push(GtInstance {
                im_id,
                obj_id: entry.obj_id,
                pose: Pose::new(rotation, t),
                cam,
            });
        }
    }
    Ok(out)
}

/// Ground-truth poses only (no camera join); used by label generation.
pub fn read_scene_gt_poses(gt_path: &Path) -> Result<Vec<(u32, u32, Pose)>> {
    let loc = gt_path.display().to_string();
    let text = fs::read_to_string(gt_path)?;
    let gt: BTreeMap<String, Vec<GtEntry>> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&loc, format!("invalid JSON: {e}")))?;
    let mut images: Vec<(u32, &Vec<GtEntry>)> = Vec::new();
    for (key, entries) in &gt {
        let im_id: u32 = key
            .parse()
            .map_err(|e| Error::parse(&loc, format!("bad image id {key:?}: {e}")))?;
        images.push((im_id, entries));
    }
    images.sort_by_key(|(id, _)| *id);
    let mut out = Vec::new();
    for (im_id, entries) in images {
        for (i, entry) in entries.iter().enumerate() {
            let human = format!("{loc} image {im_id} instance {i}");
            let m = matrix_from_row_major(&human, &entry.cam_rot)?;
            let rotation = rotation_from_checked(&human, &m, RESULT_ROT_TOL)?;
            let t = vector_from_slice(&human, &entry.cam_t, "cam_t_m2c")?;
            out.push((im_id, entry.obj_id, Pose::new(rotation, t)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// models_info.json (symmetry annotations per object)

#[derive(Deserialize)]
struct ModelsInfoEntry {
    #[serde(default)]
    symmetries_discrete: Vec<Vec<f64>>,
    #[serde(default)]
    symmetries_continuous: Vec<ContinuousSym>,
}

#[derive(Deserialize)]
struct ContinuousSym {
    axis: Vec<f64>,
    #[serde(default)]
    offset: Option<Vec<f64>>,
}

/// Read per-object symmetry sets from a BOP `models_info.json`. Discrete
/// entries are flattened 4x4 row-major transforms in millimeters.
pub fn load_models_info(path: &Path, continuous_steps: u32) -> Result<BTreeMap<u32, SymmetrySet>> {
    let loc = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let raw: BTreeMap<String, ModelsInfoEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&loc, format!("invalid JSON: {e}")))?;
    let mut out = BTreeMap::new();
    for (key, entry) in raw {
        let obj_id: u32 = key
            .parse()
            .map_err(|e| Error::parse(&loc, format!("bad object id {key:?}: {e}")))?;
        let mut set = SymmetrySet::identity();
        for (i, m) in entry.symmetries_discrete.iter().enumerate() {
            let human = format!("{loc} object {obj_id} discrete symmetry {i}");
            if m.len() != 16 {
                return Err(Error::parse(
                    &human,
                    format!("expected 16 floats, got {}", m.len()),
                ));
            }
            let rot =
                Matrix3::from_row_slice(&[m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]]);
            let rotation = rotation_from_checked(&human, &rot, SYMMETRY_ROT_TOL)?;
            set.push_transform(SymmetryTransform {
                rotation,
                translation: Vector3::new(m[3], m[7], m[11]),
            });
        }
        for (i, c) in entry.symmetries_continuous.iter().enumerate() {
            let human = format!("{loc} object {obj_id} continuous symmetry {i}");
            let axis = vector_from_slice(&human, &c.axis, "axis")?;
            let offset = match &c.offset {
                Some(o) => vector_from_slice(&human, o, "offset")?,
                None => Vector3::zeros(),
            };
            set.extend_discretized_axis(&axis, &offset, continuous_steps)?;
        }
        out.insert(obj_id, set);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// depth PNG

/// Write a depth map as 16-bit grayscale PNG at 0.1 mm per unit (the BOP
/// depth convention). Depths beyond 6553.5 mm saturate.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        depth.width() as u32,
        depth.height() as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::parse("png", e.to_string()))?;
    let mut raw = Vec::with_capacity(depth.data().len() * 2);
    for &d in depth.data() {
        let units = (d * 10.0).round().clamp(0.0, u16::MAX as f64) as u16;
        raw.extend_from_slice(&units.to_be_bytes());
    }
    writer
        .write_image_data(&raw)
        .map_err(|e| Error::parse("png", e.to_string()))?;
    Ok(())
}
