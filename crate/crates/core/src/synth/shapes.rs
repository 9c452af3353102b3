//! Analytic test surfaces with known curvature and topology.
//!
//! All builders produce consistently wound meshes (outward for closed
//! shapes, +z for heightfields) so that signed mean curvature is
//! meaningful without any orientation fix-up.

use std::collections::HashMap;

use crate::geom::Point3;
use crate::mesh::TriangleMesh;
use crate::num::Real;

/// Icosahedron subdivided `level` times and projected onto a sphere of
/// the given radius, centred at the origin. Level 0 has 12 vertices;
/// each level quadruples the face count.
pub fn icosphere<T: Real>(radius: T, level: u32) -> TriangleMesh<T> {
    let phi = (T::one() + T::of(5.0).sqrt()) / T::two();
    let one = T::one();
    let zero = T::zero();
    let raw = [
        [-one, phi, zero],
        [one, phi, zero],
        [-one, -phi, zero],
        [one, -phi, zero],
        [zero, -one, phi],
        [zero, one, phi],
        [zero, -one, -phi],
        [zero, one, -phi],
        [phi, zero, -one],
        [phi, zero, one],
        [-phi, zero, -one],
        [-phi, zero, one],
    ];
    let mut vertices: Vec<Point3<T>> = raw
        .iter()
        .map(|v| project(Point3::new(v[0], v[1], v[2]), radius))
        .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let m01 = midpoint(&mut vertices, &mut midpoints, f[0], f[1], radius);
            let m12 = midpoint(&mut vertices, &mut midpoints, f[1], f[2], radius);
            let m20 = midpoint(&mut vertices, &mut midpoints, f[2], f[0], radius);
            next.push([f[0], m01, m20]);
            next.push([f[1], m12, m01]);
            next.push([f[2], m20, m12]);
            next.push([m01, m12, m20]);
        }
        faces = next;
    }

    TriangleMesh::new(vertices, faces).expect("icosphere construction is always valid")
}

fn project<T: Real>(p: Point3<T>, radius: T) -> Point3<T> {
    p.scale(radius / p.norm())
}

fn midpoint<T: Real>(
    vertices: &mut Vec<Point3<T>>,
    cache: &mut HashMap<(u32, u32), u32>,
    a: u32,
    b: u32,
    radius: T,
) -> u32 {
    let key = (a.min(b), a.max(b));
    if let Some(&idx) = cache.get(&key) {
        return idx;
    }
    let mid = (vertices[a as usize] + vertices[b as usize]).scale(T::half());
    let idx = vertices.len() as u32;
    vertices.push(project(mid, radius));
    cache.insert(key, idx);
    idx
}

/// Open cylinder of the given radius around the z axis, spanning
/// `z in [-half_height, half_height]`, with `nu` segments around and
/// `nv` along the axis. The two end rings are boundary.
pub fn open_cylinder<T: Real>(radius: T, half_height: T, nu: u32, nv: u32) -> TriangleMesh<T> {
    assert!(nu >= 3 && nv >= 1, "cylinder needs nu >= 3, nv >= 1");
    let mut vertices = Vec::with_capacity(((nv + 1) * nu) as usize);
    for v in 0..=nv {
        let t = T::of(v as f64) / T::of(nv as f64);
        let z = half_height * (T::two() * t - T::one());
        for u in 0..nu {
            let theta = T::two() * T::pi() * T::of(u as f64) / T::of(nu as f64);
            vertices.push(Point3::new(radius * theta.cos(), radius * theta.sin(), z));
        }
    }
    let idx = |v: u32, u: u32| v * nu + (u % nu);
    let mut faces = Vec::with_capacity((nv * nu * 2) as usize);
    for v in 0..nv {
        for u in 0..nu {
            let a = idx(v, u);
            let b = idx(v, u + 1);
            let c = idx(v + 1, u + 1);
            let d = idx(v + 1, u);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("cylinder construction is always valid")
}

/// Regular-lattice heightfield over the disk `x^2 + y^2 <= radius^2`,
/// triangulated cell-by-cell with faces wound counter-clockwise seen
/// from +z. Vertices are kept where the lattice point lies inside the
/// disk, so the rim is jagged but every interior vertex has a full ring.
pub fn disk_heightfield<T, F>(radius: T, spacing: T, f: F) -> TriangleMesh<T>
where
    T: Real,
    F: Fn(T, T) -> T,
{
    assert!(
        radius > T::zero() && spacing > T::zero(),
        "disk heightfield needs positive radius and spacing"
    );
    let n = (radius / spacing).f64().ceil() as i64;
    let mut index: HashMap<(i64, i64), u32> = HashMap::new();
    let mut vertices = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let x = spacing * T::of(i as f64);
            let y = spacing * T::of(j as f64);
            if x * x + y * y <= radius * radius {
                index.insert((i, j), vertices.len() as u32);
                vertices.push(Point3::new(x, y, f(x, y)));
            }
        }
    }
    let mut faces = Vec::new();
    for i in -n..n {
        for j in -n..n {
            let corners = [
                index.get(&(i, j)),
                index.get(&(i + 1, j)),
                index.get(&(i + 1, j + 1)),
                index.get(&(i, j + 1)),
            ];
            if let [Some(&a), Some(&b), Some(&c), Some(&d)] = corners {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }

    // Lattice points whose every cell pokes outside the disk end up in
    // no face; drop them so the mesh has no isolated vertices.
    let mut remap = vec![u32::MAX; vertices.len()];
    let mut kept = Vec::new();
    for f in &faces {
        for &v in f {
            if remap[v as usize] == u32::MAX {
                remap[v as usize] = kept.len() as u32;
                kept.push(vertices[v as usize]);
            }
        }
    }
    let faces = faces
        .iter()
        .map(|f| f.map(|v| remap[v as usize]))
        .collect();
    TriangleMesh::new(kept, faces).expect("heightfield construction is always valid")
}

/// Regular-lattice heightfield over the rectangle `[0, width] x [0, depth]`
/// (snapped outward to whole lattice steps), wound counter-clockwise
/// seen from +z.
pub fn rect_heightfield<T, F>(width: T, depth: T, spacing: T, f: F) -> TriangleMesh<T>
where
    T: Real,
    F: Fn(T, T) -> T,
{
    assert!(
        width > T::zero() && depth > T::zero() && spacing > T::zero(),
        "rect heightfield needs positive dimensions and spacing"
    );
    let nx = (width / spacing).f64().ceil() as u32;
    let ny = (depth / spacing).f64().ceil() as u32;
    let mut vertices = Vec::with_capacity(((nx + 1) * (ny + 1)) as usize);
    for i in 0..=nx {
        for j in 0..=ny {
            let x = spacing * T::of(i as f64);
            let y = spacing * T::of(j as f64);
            vertices.push(Point3::new(x, y, f(x, y)));
        }
    }
    let idx = |i: u32, j: u32| i * (ny + 1) + j;
    let mut faces = Vec::with_capacity((nx * ny * 2) as usize);
    for i in 0..nx {
        for j in 0..ny {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("heightfield construction is always valid")
}
