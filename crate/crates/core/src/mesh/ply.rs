//! PLY ingestion and export. Supports `format ascii 1.0` and
//! `format binary_little_endian 1.0`; vertices need x/y/z properties (any
//! numeric type), faces need a `vertex_indices` (or `vertex_index`) list.
//! Unknown properties and elements are skipped, polygons are fan-triangulated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::geom::Point3;
use crate::mesh::TriangleMesh;
use crate::{Error, Real, Result};

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
    fn parse(tok: &str) -> Option<Self> {
        Some(match tok {
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

    fn read_le(self, r: &mut impl Read) -> std::io::Result<f64> {
        let mut buf = [0u8; 8];
        let b = &mut buf[..self.size()];
        r.read_exact(b)?;
        Ok(match self {
            Scalar::I8 => i8::from_le_bytes([b[0]]) as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

#[derive(Debug)]
enum Prop {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Prop>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Output flavor for [`save`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    /// Lines consumed by the header, for error positions in ASCII bodies.
    lines: usize,
}

fn parse_header(r: &mut impl BufRead, path: &str) -> Result<Header> {
    let mut line = String::new();
    let mut lineno = 0usize;
    let next = |r: &mut dyn BufRead, line: &mut String, lineno: &mut usize| -> Result<String> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(Error::parse(path, *lineno, "unexpected end of header"));
        }
        *lineno += 1;
        Ok(line.trim_end().to_string())
    };

    let magic = next(r, &mut line, &mut lineno)?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, 1, "not a PLY file (missing 'ply' magic)"));
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next(r, &mut line, &mut lineno)?;
        let mut tok = l.split_whitespace();
        match tok.next() {
            None => continue,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                format = match tok.next() {
                    Some("ascii") => Some(Format::Ascii),
                    Some("binary_little_endian") => Some(Format::BinaryLe),
                    Some(other) => {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("unsupported PLY format '{other}'"),
                        ))
                    }
                    None => return Err(Error::parse(path, lineno, "format line missing type")),
                };
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(path, lineno, "element missing name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "element missing/invalid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, lineno, "property before any element"))?;
                let kind = tok
                    .next()
                    .ok_or_else(|| Error::parse(path, lineno, "property missing type"))?;
                if kind == "list" {
                    let count = tok.next().and_then(Scalar::parse).ok_or_else(|| {
                        Error::parse(path, lineno, "bad list count type")
                    })?;
                    let item = tok.next().and_then(Scalar::parse).ok_or_else(|| {
                        Error::parse(path, lineno, "bad list item type")
                    })?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, lineno, "list property missing name"))?;
                    el.props.push(Prop::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = Scalar::parse(kind).ok_or_else(|| {
                        Error::parse(path, lineno, format!("unknown property type '{kind}'"))
                    })?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::parse(path, lineno, "property missing name"))?;
                    el.props.push(Prop::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unexpected header keyword '{other}'"),
                ))
            }
        }
    }
    let format =
        format.ok_or_else(|| Error::parse(path, lineno, "header has no format line"))?;
    Ok(Header {
        format,
        elements,
        lines: lineno,
    })
}

fn is_face_list(name: &str) -> bool {
    name == "vertex_indices" || name == "vertex_index"
}

fn push_polygon(
    idx: &[u64],
    n_vertices: usize,
    faces: &mut Vec<[u32; 3]>,
    path: &str,
    pos: usize,
) -> Result<()> {
    if idx.len() < 3 {
        return Err(Error::parse(path, pos, "face with fewer than 3 vertices"));
    }
    for &v in idx {
        if v >= n_vertices as u64 {
            return Err(Error::parse(
                path,
                pos,
                format!("face index {v} out of range ({n_vertices} vertices)"),
            ));
        }
    }
    for k in 1..idx.len() - 1 {
        faces.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
    }
    Ok(())
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let pathstr = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let header = parse_header(&mut r, &pathstr)?;
    match header.format {
        Format::Ascii => load_ascii(&mut r, &header, &pathstr),
        Format::BinaryLe => load_binary(&mut r, &header, &pathstr),
    }
}

fn load_ascii<T: Real>(
    r: &mut impl BufRead,
    header: &Header,
    path: &str,
) -> Result<TriangleMesh<T>> {
    let mut vertices: Vec<Point3<T>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut lineno = header.lines;
    let mut line = String::new();

    for el in &header.elements {
        let xyz = coord_slots(el, path, lineno)?;
        for _row in 0..el.count {
            // Skip blank lines between rows.
            let toks: Vec<String> = loop {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Err(Error::parse(path, lineno, "unexpected end of file"));
                }
                lineno += 1;
                let t: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                if !t.is_empty() {
                    break t;
                }
            };
            let mut cursor = 0usize;
            let mut take = |n: usize| -> Result<&[String]> {
                if cursor + n > toks.len() {
                    return Err(Error::parse(path, lineno, "too few values on line"));
                }
                let s = &toks[cursor..cursor + n];
                cursor += n;
                Ok(s)
            };
            let mut coords = [T::zero(); 3];
            for prop in &el.props {
                match prop {
                    Prop::Scalar { name, .. } => {
                        let tok = &take(1)?[0];
                        if let Some(slot) = xyz.as_ref().and_then(|m| m.slot(name)) {
                            let v: f64 = tok.parse().map_err(|_| {
                                Error::parse(path, lineno, format!("bad coordinate '{tok}'"))
                            })?;
                            coords[slot] = T::of(v);
                        }
                    }
                    Prop::List { name, .. } => {
                        let n: usize = take(1)?[0].parse().map_err(|_| {
                            Error::parse(path, lineno, "bad list count")
                        })?;
                        let items = take(n)?;
                        if el.name == "face" && is_face_list(name) {
                            let idx: Vec<u64> = items
                                .iter()
                                .map(|t| {
                                    t.parse::<u64>().map_err(|_| {
                                        Error::parse(
                                            path,
                                            lineno,
                                            format!("bad face index '{t}'"),
                                        )
                                    })
                                })
                                .collect::<Result<_>>()?;
                            push_polygon(&idx, vertices.len(), &mut faces, path, lineno)?;
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn load_binary<T: Real>(
    r: &mut impl BufRead,
    header: &Header,
    path: &str,
) -> Result<TriangleMesh<T>> {
    let mut vertices: Vec<Point3<T>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for el in &header.elements {
        let xyz = coord_slots(el, path, header.lines)?;
        for row in 0..el.count {
            let mut coords = [T::zero(); 3];
            for prop in &el.props {
                match prop {
                    Prop::Scalar { name, ty } => {
                        let v = ty.read_le(r).map_err(|e| {
                            Error::parse(path, row, format!("binary read failed: {e}"))
                        })?;
                        if let Some(slot) = xyz.as_ref().and_then(|m| m.slot(name)) {
                            coords[slot] = T::of(v);
                        }
                    }
                    Prop::List { name, count, item } => {
                        let n = count.read_le(r).map_err(|e| {
                            Error::parse(path, row, format!("binary read failed: {e}"))
                        })? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = item.read_le(r).map_err(|e| {
                                Error::parse(path, row, format!("binary read failed: {e}"))
                            })?;
                            if v < 0.0 || v.fract() != 0.0 {
                                return Err(Error::parse(
                                    path,
                                    row,
                                    format!("bad face index {v}"),
                                ));
                            }
                            idx.push(v as u64);
                        }
                        if el.name == "face" && is_face_list(name) {
                            push_polygon(&idx, vertices.len(), &mut faces, path, row)?;
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Maps property names to x/y/z slots for the `vertex` element.
struct CoordSlots;

impl CoordSlots {
    fn slot(&self, name: &str) -> Option<usize> {
        match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        }
    }
}

fn coord_slots(el: &Element, path: &str, lineno: usize) -> Result<Option<CoordSlots>> {
    if el.name != "vertex" {
        return Ok(None);
    }
    for want in ["x", "y", "z"] {
        let found = el.props.iter().any(|p| match p {
            Prop::Scalar { name, .. } => name == want,
            Prop::List { .. } => false,
        });
        if !found {
            return Err(Error::parse(
                path,
                lineno,
                format!("vertex element lacks '{want}' property"),
            ));
        }
    }
    Ok(Some(CoordSlots))
}

/// Write a mesh. Coordinates are written as `double` for f64 scalars and
/// `float` otherwise; ASCII uses the shortest round-trip decimal form, so an
/// ASCII save/load cycle reproduces coordinates bit-exactly.
pub fn save<T: Real>(
    mesh: &TriangleMesh<T>,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    let ctype = if std::mem::size_of::<T>() == 8 {
        "double"
    } else {
        "float"
    };
    let fmt_line = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt_line} 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property {ctype} x")?;
    writeln!(w, "property {ctype} y")?;
    writeln!(w, "property {ctype} z")?;
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    match format {
        PlyFormat::Ascii => {
            for p in mesh.vertices() {
                writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for p in mesh.vertices() {
                for c in [p.x, p.y, p.z] {
                    if std::mem::size_of::<T>() == 8 {
                        w.write_all(&c.f64().to_le_bytes())?;
                    } else {
                        w.write_all(&(c.f64() as f32).to_le_bytes())?;
                    }
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &v in f {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
