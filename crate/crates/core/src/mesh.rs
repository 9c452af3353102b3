//! Triangle meshes, point clouds, file ingestion and seeded subsampling.
//!
//! Coordinates are micrometres and are taken verbatim from files — no unit
//! conversion anywhere. Meshes are immutable once constructed, so they can be
//! shared freely across worker threads.

pub mod obj;
pub mod ply;

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::geom::Point3;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<Point3<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Indexed triangle surface. Construction validates face indices and
/// rejects degenerate faces; boundary flags are derived once from edge
/// incidence (an edge used by exactly one face is a boundary edge).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T> {
    vertices: Vec<Point3<T>>,
    faces: Vec<[u32; 3]>,
    boundary: Vec<bool>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Point3<T>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u64;
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if u64::from(v) >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {v}, but only {n} vertices exist"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex index: {f:?}"
                )));
            }
        }
        if vertices
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let boundary = boundary_flags(vertices.len(), &faces);
        Ok(Self {
            vertices,
            faces,
            boundary,
        })
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn point_cloud(&self) -> PointCloud<T> {
        PointCloud::new(self.vertices.clone())
    }

    /// Sorted unique one-ring neighbor indices per vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                nb[f[a] as usize].push(f[b]);
                nb[f[b] as usize].push(f[a]);
            }
        }
        for v in &mut nb {
            v.sort_unstable();
            v.dedup();
        }
        nb
    }

    /// Incident face indices per vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(fi as u32);
            }
        }
        vf
    }

    /// Restrict to the given vertices (deduplicated, sorted), keeping faces
    /// whose three corners all survive. Returns the sub-mesh and, per new
    /// vertex, its index in the parent mesh.
    pub fn submesh(&self, keep: &[u32]) -> Result<(TriangleMesh<T>, Vec<u32>)> {
        let mut kept: Vec<u32> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.is_empty() {
            return Err(Error::invalid("submesh over empty vertex selection"));
        }
        if let Some(&v) = kept.last() {
            if v as usize >= self.vertices.len() {
                return Err(Error::invalid(format!("submesh vertex {v} out of range")));
            }
        }
        let mut remap: HashMap<u32, u32> = HashMap::with_capacity(kept.len());
        for (new, &old) in kept.iter().enumerate() {
            remap.insert(old, new as u32);
        }
        let vertices = kept
            .iter()
            .map(|&v| self.vertices[v as usize])
            .collect::<Vec<_>>();
        let faces = self
            .faces
            .iter()
            .filter_map(|f| {
                Some([
                    *remap.get(&f[0])?,
                    *remap.get(&f[1])?,
                    *remap.get(&f[2])?,
                ])
            })
            .collect::<Vec<_>>();
        Ok((TriangleMesh::new(vertices, faces)?, kept))
    }

    pub fn bounding_box(&self) -> Option<(Point3<T>, Point3<T>)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let mut lo = first;
        let mut hi = first;
        for p in it {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            lo.z = lo.z.min(p.z);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
            hi.z = hi.z.max(p.z);
        }
        Some((lo, hi))
    }
}

fn boundary_flags(n_vertices: usize, faces: &[[u32; 3]]) -> Vec<bool> {
    let mut edge_count: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let key = (a.min(b), a.max(b));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut flags = vec![false; n_vertices];
    for ((a, b), c) in edge_count {
        if c == 1 {
            flags[a as usize] = true;
            flags[b as usize] = true;
        }
    }
    flags
}

/// Load a surface mesh, picking the parser from the file extension
/// (`.ply` or `.obj`, case-insensitive).
pub fn load_surface<T: Real>(path: impl AsRef<Path>) -> Result<TriangleMesh<T>> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let mesh = match ext.as_str() {
        "ply" => ply::load(path)?,
        "obj" => obj::load(path)?,
        other => {
            return Err(Error::invalid(format!(
                "unsupported mesh format '{other}' (expected .ply or .obj): {}",
                path.display()
            )))
        }
    };
    if mesh.vertex_count() == 0 {
        return Err(Error::InvalidMesh(format!("empty mesh: {}", path.display())));
    }
    Ok(mesh)
}

/// Uniform subsample without replacement; identity when the cloud already
/// fits in `n`. Selected points keep their input order.
pub fn subsample<T: Real>(cloud: &PointCloud<T>, n: usize, seed: u64) -> Result<PointCloud<T>> {
    if n == 0 {
        return Err(Error::invalid("subsample target must be >= 1"));
    }
    if cloud.len() <= n {
        return Ok(cloud.clone());
    }
    let mut rng = crate::rng::rng_from(seed);
    let mut idx: Vec<u32> = (0..cloud.len() as u32).collect();
    idx.shuffle(&mut rng);
    idx.truncate(n);
    idx.sort_unstable();
    Ok(PointCloud::new(
        idx.iter().map(|&i| cloud.points[i as usize]).collect(),
    ))
}

/// Farthest-point subsample: greedy max-min selection from a seeded start.
/// Slower than uniform but spreads points evenly; offered as an alternative
/// sampler for the topological pipeline.
pub fn subsample_farthest<T: Real>(
    cloud: &PointCloud<T>,
    n: usize,
    seed: u64,
) -> Result<PointCloud<T>> {
    if n == 0 {
        return Err(Error::invalid("subsample target must be >= 1"));
    }
    if cloud.len() <= n {
        return Ok(cloud.clone());
    }
    use rand::Rng;
    let mut rng = crate::rng::rng_from(seed);
    let start = rng.gen_range(0..cloud.len());
    let mut chosen = vec![start];
    let mut best = cloud
        .points
        .iter()
        .map(|p| p.dist_sq(cloud.points[start]))
        .collect::<Vec<_>>();
    while chosen.len() < n {
        let (next, _) = best
            .iter()
            .enumerate()
            .fold((0usize, T::neg_infinity()), |acc, (i, &d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
        chosen.push(next);
        let np = cloud.points[next];
        for (b, p) in best.iter_mut().zip(&cloud.points) {
            let d = p.dist_sq(np);
            if d < *b {
                *b = d;
            }
        }
    }
    chosen.sort_unstable();
    Ok(PointCloud::new(
        chosen.iter().map(|&i| cloud.points[i]).collect(),
    ))
}
