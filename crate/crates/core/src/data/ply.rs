//! Minimal polygon-file-format codec: vertex positions, optional vertex
//! colors, and face index lists, in ascii or binary encodings.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn decode(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(&b[..$n]);
                (if little { <$t>::from_le_bytes(a) } else { <$t>::from_be_bytes(a) }) as f64
            }};
        }
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => num!(i16, 2),
            Self::U16 => num!(u16, 2),
            Self::I32 => num!(i32, 4),
            Self::U32 => num!(u32, 4),
            Self::F32 => num!(f32, 4),
            Self::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar, String),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Point3>,
    /// Polygons as read; not triangulated.
    pub faces: Vec<Vec<usize>>,
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = fs::read(path)?;
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| malformed(path, 0, "no end_header"))?;
    let mut body = end + marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed(path, 0, "header is not text"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(malformed(path, 1, "missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines = 1;
    for (n, line) in lines.enumerate() {
        let ln = n + 2;
        header_lines = ln;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _] => {
                encoding = Some(match *f {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => PlyEncoding::BinaryBigEndian,
                    other => return Err(malformed(path, ln, format!("unknown format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| malformed(path, ln, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let (c, i) = Scalar::parse(c)
                    .zip(Scalar::parse(i))
                    .ok_or_else(|| malformed(path, ln, "unknown list type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| malformed(path, ln, "property before element"))?
                    .props
                    .push(Property::List(c, i, name.to_string()));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| malformed(path, ln, format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| malformed(path, ln, "property before element"))?
                    .props
                    .push(Property::Scalar(ty, name.to_string()));
            }
            _ => return Err(malformed(path, ln, format!("unrecognized header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| malformed(path, 0, "no format line"))?;
    let mut out = PlyData::default();
    match encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(&bytes[body..]).map_err(|_| malformed(path, 0, "ascii body is not text"))?;
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for el in &elements {
                for _ in 0..el.count {
                    let (n, line) = lines.next().ok_or_else(|| malformed(path, 0, format!("truncated `{}`", el.name)))?;
                    let ln = header_lines + 2 + n;
                    let mut tokens = line.split_whitespace().map(|t| {
                        t.parse::<f64>().map_err(|_| malformed(path, ln, format!("bad number `{t}`")))
                    });
                    let mut next = || tokens.next().unwrap_or_else(|| Err(malformed(path, ln, "too few values")));
                    read_instance(el, &mut out, path, ln, &mut next)?;
                }
            }
        }
        binary => {
            let little = binary == PlyEncoding::BinaryLittleEndian;
            let mut pos = body;
            for el in &elements {
                for _ in 0..el.count {
                    let mut next_typed = |ty: Scalar| -> Result<f64> {
                        let b = bytes
                            .get(pos..pos + ty.size())
                            .ok_or_else(|| malformed(path, 0, format!("truncated binary `{}`", el.name)))?;
                        pos += ty.size();
                        Ok(ty.decode(b, little))
                    };
                    read_binary_instance(el, &mut out, path, &mut next_typed)?;
                }
            }
        }
    }
    Ok(out)
}

fn store(el: &Element, xyz: &mut [Option<f64>; 3], name: &str, v: f64) {
    if el.name == "vertex" {
        match name {
            "x" => xyz[0] = Some(v),
            "y" => xyz[1] = Some(v),
            "z" => xyz[2] = Some(v),
            _ => {}
        }
    }
}

fn finish(el: &Element, out: &mut PlyData, path: &Path, ln: usize, xyz: [Option<f64>; 3], face: Option<Vec<usize>>) -> Result<()> {
    if el.name == "vertex" {
        match xyz {
            [Some(x), Some(y), Some(z)] => out.vertices.push([x, y, z]),
            _ => return Err(malformed(path, ln, "vertex without x, y, z")),
        }
    } else if el.name == "face" {
        out.faces.push(face.ok_or_else(|| malformed(path, ln, "face without an index list"))?);
    }
    Ok(())
}

fn is_face_list(el: &Element, name: &str) -> bool {
    el.name == "face" && (name == "vertex_indices" || name == "vertex_index")
}

fn to_index(v: f64, path: &Path, ln: usize) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(malformed(path, ln, format!("bad vertex index {v}")))
    }
}

fn read_instance(
    el: &Element,
    out: &mut PlyData,
    path: &Path,
    ln: usize,
    next: &mut dyn FnMut() -> Result<f64>,
) -> Result<()> {
    let mut xyz = [None; 3];
    let mut face = None;
    for p in &el.props {
        match p {
            Property::Scalar(_, name) => {
                let v = next()?;
                store(el, &mut xyz, name, v);
            }
            Property::List(_, _, name) => {
                let n = to_index(next()?, path, ln)?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(next()?);
                }
                if is_face_list(el, name) {
                    face = Some(items.into_iter().map(|v| to_index(v, path, ln)).collect::<Result<_>>()?);
                }
            }
        }
    }
    finish(el, out, path, ln, xyz, face)
}

fn read_binary_instance(
    el: &Element,
    out: &mut PlyData,
    path: &Path,
    next: &mut dyn FnMut(Scalar) -> Result<f64>,
) -> Result<()> {
    let mut xyz = [None; 3];
    let mut face = None;
    for p in &el.props {
        match p {
            Property::Scalar(ty, name) => {
                let v = next(*ty)?;
                store(el, &mut xyz, name, v);
            }
            Property::List(c, i, name) => {
                let n = to_index(next(*c)?, path, 0)?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(next(*i)?);
                }
                if is_face_list(el, name) {
                    face = Some(items.into_iter().map(|v| to_index(v, path, 0)).collect::<Result<_>>()?);
                }
            }
        }
    }
    finish(el, out, path, 0, xyz, face)
}

/// Writes vertices as `float` coordinates, with optional `uchar` colors.
pub fn write_ply(path: &Path, points: &[Point3], colors: Option<&[[u8; 3]]>, encoding: PlyEncoding) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != points.len() {
            return Err(Error::ShapeMismatch(format!("{} colors for {} points", c.len(), points.len())));
        }
    }
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
        PlyEncoding::BinaryBigEndian => "binary_big_endian",
    };
    let mut buf = Vec::new();
    writeln!(buf, "ply\nformat {format} 1.0\nelement vertex {}", points.len())?;
    writeln!(buf, "property float x\nproperty float y\nproperty float z")?;
    if colors.is_some() {
        writeln!(buf, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(buf, "end_header")?;
    for (i, p) in points.iter().enumerate() {
        let c = colors.map(|c| c[i]);
        match encoding {
            PlyEncoding::Ascii => {
                write!(buf, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
                if let Some(c) = c {
                    write!(buf, " {} {} {}", c[0], c[1], c[2])?;
                }
                writeln!(buf)?;
            }
            PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
                for v in p {
                    let v = *v as f32;
                    buf.extend_from_slice(&if encoding == PlyEncoding::BinaryLittleEndian {
                        v.to_le_bytes()
                    } else {
                        v.to_be_bytes()
                    });
                }
                if let Some(c) = c {
                    buf.extend_from_slice(&c);
                }
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_ascii_mesh_with_extra_properties() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
             property float nx\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0 9\n1 0 0 9\n0 1 0 9\n3 0 1 2\n",
        )
        .unwrap();
        let d = read_ply(&path).unwrap();
        assert_eq!(d.vertices, vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(d.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn binary_roundtrip_both_endians() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![[0.25, -0.5, 0.125], [1e-3, 2.0, -3.5]];
        let colors = [[1, 2, 3], [200, 100, 0]];
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::BinaryBigEndian, PlyEncoding::Ascii] {
            let path = dir.path().join("c.ply");
            write_ply(&path, &pts, Some(&colors), enc).unwrap();
            let d = read_ply(&path).unwrap();
            for (a, b) in d.vertices.iter().zip(&pts) {
                for k in 0..3 {
                    assert_eq!(a[k] as f32, b[k] as f32);
                }
            }
        }
    }

    #[test]
    fn truncated_binary_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ply");
        fs::write(&path, b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n\0\0\0\0").unwrap();
        assert!(matches!(read_ply(&path), Err(Error::Malformed { .. })));
    }
}
