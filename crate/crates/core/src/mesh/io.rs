//! OBJ and PLY (ascii, binary little-endian) mesh I/O.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{Error, Location, Result};

type V3 = Vector3<f64>;

/// Length unit of coordinates stored in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    #[serde(alias = "mm")]
    Millimeters,
    #[serde(alias = "m")]
    Meters,
}

impl Units {
    pub fn to_mm(self) -> f64 {
        match self {
            Units::Millimeters => 1.0,
            Units::Meters => 1000.0,
        }
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm" | "millimeters" => Ok(Units::Millimeters),
            "m" | "meters" => Ok(Units::Meters),
            other => Err(Error::Parameter(format!("unknown unit `{other}` (use mm or meters)"))),
        }
    }
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    load_mesh_with_units(path, Units::Millimeters)
}

/// Load an OBJ or PLY file, scaling coordinates to millimeters.
pub fn load_mesh_with_units(path: &Path, units: Units) -> Result<TriMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let (mut vertices, triangles) = if bytes.starts_with(b"ply") {
        parse_ply(&bytes, &name)?
    } else {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if ext == "ply" {
            return Err(Error::format(name, Location::Byte(0), "missing `ply` magic"));
        }
        let text = std::str::from_utf8(&bytes).map_err(|e| {
            Error::format(&name, Location::Byte(e.valid_up_to() as u64), "OBJ is not valid UTF-8")
        })?;
        parse_obj(text, &name)?
    };
    if vertices.is_empty() || triangles.is_empty() {
        return Err(Error::Content(format!("{name} contains no triangles")));
    }
    let scale = units.to_mm();
    if scale != 1.0 {
        for v in &mut vertices {
            *v *= scale;
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Parse Wavefront OBJ `v`/`f` records; polygons are fan-triangulated.
pub fn parse_obj(text: &str, name: &str) -> Result<(Vec<V3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (line_index, raw) in text.lines().enumerate() {
        let line_no = line_index + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let err = |msg: String| Error::format(name, Location::Line(line_no), msg);
        match tag {
            "v" => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad coordinate `{s}`"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(err("non-finite coordinate".into()));
                }
                vertices.push(V3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let mut idx = Vec::new();
                for token in parts {
                    let head = token.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| err(format!("bad face index `{token}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err("face index 0 is invalid".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
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

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

/// Parse PLY with `vertex` (x, y, z) and `face` (vertex_indices list) elements.
pub fn parse_ply(bytes: &[u8], name: &str) -> Result<(Vec<V3>, Vec<[u32; 3]>)> {
    let header_end = find_subsequence(bytes, b"end_header")
        .ok_or_else(|| Error::format(name, Location::Byte(0), "PLY header has no end_header"))?;
    let mut body_start = header_end + b"end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::format(name, Location::Byte(0), "PLY header is not ASCII"))?;

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in header.lines().enumerate() {
        let err = |m: &str| Error::format(name, Location::Line(i + 1), m.to_string());
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["ply"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", other, ..] => return Err(err(&format!("unsupported PLY format `{other}`"))),
            ["element", ename, count] => {
                let count = count.parse().map_err(|_| err("bad element count"))?;
                elements.push(Element {
                    name: ename.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ct, it, pname] => {
                let ct = Scalar::parse(ct).ok_or_else(|| err("bad list count type"))?;
                let it = Scalar::parse(it).ok_or_else(|| err("bad list item type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| err("property before element"))?
                    .properties
                    .push(Property::List(pname.to_string(), ct, it));
            }
            ["property", ty, pname] => {
                let ty = Scalar::parse(ty).ok_or_else(|| err("bad property type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| err("property before element"))?
                    .properties
                    .push(Property::Scalar(pname.to_string(), ty));
            }
            _ => return Err(err(&format!("unrecognized header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| Error::format(name, Location::Byte(0), "PLY format line missing"))?;
    let body = &bytes[body_start..];
    let mut reader: Box<dyn PlyReader + '_> = match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::format(name, Location::Byte(body_start as u64), "ASCII PLY body is not UTF-8"))?;
            let header_lines = header.lines().count() + 1;
            Box::new(AsciiReader::new(text, header_lines, name))
        }
        PlyFormat::BinaryLe => Box::new(BinaryReader {
            bytes: body,
            pos: 0,
            base: body_start as u64,
            name,
        }),
    };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for element in &elements {
        for _ in 0..element.count {
            reader.begin_record()?;
            let mut xyz = [0.0f64; 3];
            let mut face: Option<Vec<i64>> = None;
            for prop in &element.properties {
                match prop {
                    Property::Scalar(pname, ty) => {
                        let v = reader.scalar(*ty)?;
                        if element.name == "vertex" {
                            match pname.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List(pname, ct, it) => {
                        let n = reader.scalar(*ct)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(reader.error("bad list length"));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(reader.scalar(*it)? as i64);
                        }
                        if element.name == "face"
                            && (pname == "vertex_indices" || pname == "vertex_index")
                        {
                            face = Some(items);
                        }
                    }
                }
            }
            reader.end_record()?;
            if element.name == "vertex" {
                if !xyz.iter().all(|c| c.is_finite()) {
                    return Err(reader.error("non-finite vertex coordinate"));
                }
                vertices.push(V3::new(xyz[0], xyz[1], xyz[2]));
            } else if let Some(idx) = face {
                if idx.len() < 3 {
                    return Err(reader.error("face needs at least three vertices"));
                }
                if idx.iter().any(|&i| i < 0 || i as usize >= vertices.len()) {
                    return Err(reader.error("face index out of range"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                }
            }
        }
    }
    Ok((vertices, triangles))
}

trait PlyReader {
    fn begin_record(&mut self) -> Result<()>;
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn end_record(&mut self) -> Result<()>;
    fn error(&self, msg: &str) -> Error;
}

struct AsciiReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    tokens: Vec<&'a str>,
    cursor: usize,
    line_no: usize,
    first_line: usize,
    name: &'a str,
}

impl<'a> AsciiReader<'a> {
    fn new(text: &'a str, first_line: usize, name: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            tokens: Vec::new(),
            cursor: 0,
            line_no: first_line,
            first_line,
            name,
        }
    }
}

impl PlyReader for AsciiReader<'_> {
    fn begin_record(&mut self) -> Result<()> {
        loop {
            let Some((i, line)) = self.lines.next() else {
                return Err(Error::format(
                    self.name,
                    Location::Line(self.line_no + 1),
                    "unexpected end of file (truncated PLY body)",
                ));
            };
            self.line_no = self.first_line + i + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                self.tokens = tokens;
                self.cursor = 0;
                return Ok(());
            }
        }
    }

    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let tok = self
            .tokens
            .get(self.cursor)
            .ok_or_else(|| self.error("record has too few values"))?;
        self.cursor += 1;
        tok.parse::<f64>()
            .map_err(|_| self.error(&format!("bad number `{tok}`")))
    }

    fn end_record(&mut self) -> Result<()> {
        if self.cursor != self.tokens.len() {
            return Err(self.error("record has extra values"));
        }
        Ok(())
    }

    fn error(&self, msg: &str) -> Error {
        Error::format(self.name, Location::Line(self.line_no), msg.to_string())
    }
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: u64,
    name: &'a str,
}

impl PlyReader for BinaryReader<'_> {
    fn begin_record(&mut self) -> Result<()> {
        Ok(())
    }

    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.bytes.len() {
            return Err(self.error("unexpected end of file (truncated PLY body)"));
        }
        let v = ty.read_le(&self.bytes[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }

    fn end_record(&mut self) -> Result<()> {
        Ok(())
    }

    fn error(&self, msg: &str) -> Error {
        Error::format(self.name, Location::Byte(self.base + self.pos as u64), msg.to_string())
    }
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Write a mesh as OBJ with lossless (shortest round-trip) coordinates.
pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_OBJ: &str = "\
# unit cube
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v -0.5 0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v -0.5 0.5 0.5
v 0.5 0.5 0.5
f 1 5 7 3
f 2/1 4/1 8/1 6/1
f 1//1 2//1 6//1 5//1
f 3 7 8 4
f 1 3 4 2
f 5 6 8 7
";

    #[test]
    fn obj_quads_are_fan_triangulated() {
        let (v, t) = parse_obj(CUBE_OBJ, "cube.obj").unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(t.len(), 12);
        let m = TriMesh::new(v, t).unwrap();
        assert!((m.diameter() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn obj_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let (_, t) = parse_obj(text, "t").unwrap();
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_errors_carry_line_numbers() {
        let err = parse_obj("v 0 0 0\nv 1 0\n", "bad.obj").unwrap_err();
        assert!(matches!(err, Error::Format { location: Location::Line(2), .. }), "{err}");
        let err = parse_obj("v 0 0 0\nf 1 2 3\n", "bad.obj").unwrap_err();
        assert!(matches!(err, Error::Format { location: Location::Line(2), .. }));
        let err = parse_obj("v 0 0 0\nv 1 x 0\n", "bad.obj").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn ply_ascii_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255\n1 0 0 0\n0 1 0 9\n3 0 1 2\n";
        let (v, t) = parse_ply(text.as_bytes(), "t.ply").unwrap();
        assert_eq!(v[1], V3::new(1.0, 0.0, 0.0));
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn ply_truncation_is_a_format_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n";
        let err = parse_ply(text.as_bytes(), "t.ply").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        bin.extend_from_slice(&1.0f32.to_le_bytes());
        let err = parse_ply(&bin, "t.ply").unwrap_err();
        assert!(matches!(err, Error::Format { location: Location::Byte(_), .. }), "{err}");
    }

    #[test]
    fn big_endian_is_rejected() {
        let text = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(parse_ply(text, "t.ply").is_err());
    }
}
