//! Wavefront OBJ: `v` and `f` records only, 1-based indices, `v/vt/vn`
//! slash syntax tolerated. Everything else (normals, groups, materials) is
//! skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::geom::Point3;
use crate::mesh::TriangleMesh;
use crate::{Error, Real, Result};

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let pathstr = path.display().to_string();
    let r = BufReader::new(File::open(path)?);

    let mut vertices: Vec<Point3<T>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [T::zero(); 3];
                for slot in &mut c {
                    let t = tok
                        .next()
                        .ok_or_else(|| Error::parse(&pathstr, lineno, "vertex needs 3 coords"))?;
                    let v: f64 = t.parse().map_err(|_| {
                        Error::parse(&pathstr, lineno, format!("bad coordinate '{t}'"))
                    })?;
                    *slot = T::of(v);
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx: Vec<u64> = Vec::with_capacity(4);
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let v: i64 = first.parse().map_err(|_| {
                        Error::parse(&pathstr, lineno, format!("bad face index '{t}'"))
                    })?;
                    if v < 1 {
                        return Err(Error::parse(
                            &pathstr,
                            lineno,
                            format!("face index {v} not positive (1-based indices required)"),
                        ));
                    }
                    let zero_based = (v - 1) as u64;
                    if zero_based >= vertices.len() as u64 {
                        return Err(Error::parse(
                            &pathstr,
                            lineno,
                            format!("face index {v} out of range ({} vertices)", vertices.len()),
                        ));
                    }
                    idx.push(zero_based);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(&pathstr, lineno, "face with fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn save<T: Real>(mesh: &TriangleMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}
