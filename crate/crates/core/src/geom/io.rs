//! OBJ and PLY readers and writers.
//!
//! Readers accept polygons and fan-triangulate them from their first vertex.
//! Writers emit vertices as 32-bit floats.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

/// Loads an OBJ or PLY mesh, chosen by extension (falling back to content
/// sniffing). Degenerate faces are dropped; a mesh without valid triangles is
/// an error.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    mesh_from_bytes(&bytes, path)
}

/// [`load_mesh`] on bytes already read from `path`.
pub fn mesh_from_bytes(bytes: &[u8], path: &Path) -> Result<TriangleMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let is_ply = match ext.as_deref() {
        Some("ply") => true,
        Some("obj") => false,
        _ => bytes.starts_with(b"ply"),
    };
    let (verts, faces) = if is_ply {
        parse_ply(bytes)?
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
            format: "obj",
            msg: e.to_string(),
        })?;
        parse_obj(text)?
    };
    let mesh = TriangleMesh::new(verts, faces)?;
    if mesh.is_empty() {
        return Err(Error::NoTriangles);
    }
    Ok(mesh.with_provenance(path.display().to_string()))
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn obj_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        format: "obj",
        msg: format!("line {line}: {msg}"),
    }
}

pub fn parse_obj(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[u32; 3]>)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for v in &mut c {
                    *v = it
                        .next()
                        .ok_or_else(|| obj_err(lineno + 1, "vertex needs 3 coordinates"))?
                        .parse()
                        .map_err(|e| obj_err(lineno + 1, e))?;
                }
                verts.push(Point3::from(c));
            }
            Some("f") => {
                poly.clear();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|e| obj_err(lineno + 1, e))?;
                    let idx = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        verts.len() as i64 + i
                    } else {
                        return Err(obj_err(lineno + 1, "index 0"));
                    };
                    if idx < 0 || idx >= verts.len() as i64 {
                        return Err(obj_err(lineno + 1, format!("index {i} out of range")));
                    }
                    poly.push(idx as u32);
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
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
    fn parse(s: &str) -> Option<Self> {
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

    fn read(self, b: &[u8], little: bool) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if little { <$t>::from_le_bytes(a) } else { <$t>::from_be_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
    BinaryBe,
}

fn ply_err(msg: impl Into<String>) -> Error {
    Error::Parse {
        format: "ply",
        msg: msg.into(),
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<(Vec<Point3<f64>>, Vec<[u32; 3]>)> {
    let header_end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| ply_err("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| ply_err(e.to_string()))?;
    let mut body_start = header_end + 10;
    // consume the line terminator
    while body_start < bytes.len() && (bytes[body_start] == b'\r' || bytes[body_start] == b'\n') {
        body_start += 1;
        if bytes[body_start - 1] == b'\n' {
            break;
        }
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in header.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if i == 0 => {}
            _ if i == 0 => return Err(ply_err("missing magic")),
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLe,
                    "binary_big_endian" => PlyFormat::BinaryBe,
                    other => return Err(ply_err(format!("unknown format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| ply_err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, t, name] => {
                let el = elements.last_mut().ok_or_else(|| ply_err("property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(c).ok_or_else(|| ply_err(format!("bad type {c}")))?,
                    item: Scalar::parse(t).ok_or_else(|| ply_err(format!("bad type {t}")))?,
                });
            }
            ["property", t, name] => {
                let el = elements.last_mut().ok_or_else(|| ply_err("property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(t).ok_or_else(|| ply_err(format!("bad type {t}")))?,
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            other => return Err(ply_err(format!("unexpected header line {other:?}"))),
        }
    }
    let format = format.ok_or_else(|| ply_err("missing format line"))?;

    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let mut poly: Vec<u32> = Vec::new();
    let body = &bytes[body_start..];

    let mut ascii_tokens = match format {
        PlyFormat::Ascii => Some(
            std::str::from_utf8(body)
                .map_err(|e| ply_err(e.to_string()))?
                .split_whitespace(),
        ),
        _ => None,
    };
    let little = format == PlyFormat::BinaryLe;
    let mut offset = 0usize;
    let mut next = |ty: Scalar| -> Result<f64> {
        match ascii_tokens.as_mut() {
            Some(toks) => toks
                .next()
                .ok_or_else(|| ply_err("truncated ascii body"))?
                .parse::<f64>()
                .map_err(|e| ply_err(e.to_string())),
            None => {
                let n = ty.size();
                let b = body
                    .get(offset..offset + n)
                    .ok_or_else(|| ply_err("truncated binary body"))?;
                offset += n;
                Ok(ty.read(b, little))
            }
        }
    };

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            poly.clear();
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = next(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = next(*count)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(ply_err("bad list length"));
                        }
                        let keep = el.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n as usize {
                            let v = next(*item)?;
                            if keep {
                                poly.push(v as u32);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => verts.push(Point3::from(xyz)),
                "face" => fan(&poly, &mut faces),
                _ => {}
            }
        }
    }
    Ok((verts, faces))
}

pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, obj_bytes(mesh)).map_err(|e| Error::io(path, e))
}

/// OBJ text with `f32`-rounded vertices.
pub fn obj_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(mesh.vertices().len() * 32 + mesh.triangles().len() * 24);
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

pub fn write_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&ply_bytes(mesh))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Binary little-endian PLY.
pub fn ply_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + mesh.vertices().len() * 12 + mesh.triangles().len() * 13);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    )
    .unwrap();
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

/// Writes OBJ or PLY by extension (PLY unless the extension is `obj`).
pub fn write_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("obj") => write_obj(mesh, path),
        _ => write_ply(mesh, path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;

    const CUBE_OBJ: &str = "\
# cube
v 0 0 0
v 1 0 0
v 0 1 0
v 1 1 0
v 0 0 1
v 1 0 1
v 0 1 1
v 1 1 1
f 1 5 7
f 1 7 3
f 2 4 8
f 2 8 6
f 1 2 6
f 1 6 5
f 3 7 8
f 3 8 4
f 1 3 4
f 1 4 2
f 5 6 8
f 5 8 7
";

    #[test]
    fn obj_cube() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        fs::write(&p, CUBE_OBJ).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        assert!(crate::geom::is_watertight(&m).watertight);
    }

    #[test]
    fn obj_quad_is_fan_split() {
        let (v, f) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_negative_indices() {
        let (_, f) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(f, vec![[0, 1, 2]]);
    }

    #[test]
    fn points_only_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.obj");
        fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\n").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::NoTriangles)));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_mesh("/nonexistent/x.obj"), Err(Error::Io { .. })));
    }

    #[test]
    fn non_finite_obj_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nan.obj");
        fs::write(&p, "v nan 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::NonFinite(0))));
    }

    #[test]
    fn ply_binary_roundtrip() {
        let m = shapes::icosphere(0.7, 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.ply");
        write_ply(&m, &p).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn ply_ascii_with_quad_and_extra_props() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 9\n1 0 0 9\n1 1 0 9\n0 1 0 9\n4 0 1 2 3\n";
        let (v, f) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[2], Point3::new(1.0, 1.0, 0.0));
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn truncated_binary_ply() {
        let m = shapes::unit_cube();
        let mut b = ply_bytes(&m);
        b.truncate(b.len() - 3);
        assert!(parse_ply(&b).is_err());
    }
}
