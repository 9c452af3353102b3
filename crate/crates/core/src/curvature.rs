//! Discrete curvature on triangle meshes.
//!
//! Gaussian curvature is the angle deficit divided by the mixed
//! finite-element/finite-volume area (Voronoi area clipped for obtuse
//! triangles); mean curvature is the cotangent Laplace vector magnitude
//! over four times the mixed area, signed by projection onto the
//! outward vertex normal. Boundary vertices carry no deficit and are
//! excluded from every statistic.

use std::io::Write;

use crate::geom::{self, Point3};
use crate::mesh::TriangleMesh;
use crate::num::{fcmp, Real};
use crate::{Error, Result};

/// Per-vertex curvature arrays, index-aligned with the mesh vertices.
/// Entries at invalid vertices (boundary or isolated) are zero.
#[derive(Debug, Clone)]
pub struct CurvatureField<T> {
    /// Gaussian curvature, 1/length².
    pub gaussian: Vec<T>,
    /// Signed mean curvature, 1/length. Positive where the surface is
    /// convex toward the outward normal.
    pub mean: Vec<T>,
    /// Mixed area associated with each vertex, length².
    pub mixed_area: Vec<T>,
    /// Raw angle deficit in radians, kept for diagnostics.
    pub deficit: Vec<T>,
    /// False on boundary vertices, isolated vertices, and vertices whose
    /// mixed area degenerates to zero.
    pub valid: Vec<bool>,
}

/// Aggregate statistics of a curvature field over its valid vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFeatures<T> {
    pub min_gaussian: T,
    pub max_gaussian: T,
    pub min_mean: T,
    pub max_mean: T,
    /// min(x, y) / max(x, y) where x, y count vertices with positive and
    /// negative Gaussian curvature beyond the tolerance; 0 when both
    /// counts are 0.
    pub ratio_gaussian: T,
    pub ratio_mean: T,
    /// x / (x + y); 0 when both counts are 0.
    pub positive_gaussian: T,
    pub positive_mean: T,
}

/// Cotangent of the angle between `u` and `w`; 0 for degenerate spans.
fn cot<T: Real>(u: Point3<T>, w: Point3<T>) -> T {
    let cross = u.cross(w).norm();
    if cross > T::zero() {
        u.dot(w) / cross
    } else {
        T::zero()
    }
}

/// Faces incident to `v`, each rotated so `v` comes first.
fn incident_corners<T: Real>(mesh: &TriangleMesh<T>, v: u32) -> Vec<[u32; 3]> {
    mesh.faces()
        .iter()
        .filter_map(|f| {
            f.iter()
                .position(|&i| i == v)
                .map(|k| [f[k], f[(k + 1) % 3], f[(k + 2) % 3]])
        })
        .collect()
}

/// Sum of incident-triangle angles at `v`, subtracted from a full turn.
/// Errors on boundary and isolated vertices, where the deficit does not
/// measure curvature.
pub fn angle_deficit<T: Real>(mesh: &TriangleMesh<T>, v: u32) -> Result<T> {
    check_interior(mesh, v)?;
    let verts = mesh.vertices();
    let mut sum = T::zero();
    for [p, q, r] in incident_corners(mesh, v) {
        sum += geom::angle_at(
            verts[p as usize],
            verts[q as usize],
            verts[r as usize],
        );
    }
    Ok(T::two() * T::pi() - sum)
}

/// Mixed finite-element/finite-volume area at `v`: the Voronoi piece of
/// every non-obtuse incident triangle, half the triangle area when the
/// obtuse corner is at `v`, a quarter otherwise. The pieces of one
/// triangle always sum to its full area, so mixed areas partition a
/// closed mesh exactly.
pub fn mixed_area<T: Real>(mesh: &TriangleMesh<T>, v: u32) -> Result<T> {
    check_interior(mesh, v)?;
    let verts = mesh.vertices();
    let mut total = T::zero();
    for [p, q, r] in incident_corners(mesh, v) {
        total += corner_area(verts[p as usize], verts[q as usize], verts[r as usize]);
    }
    Ok(total)
}

/// Mixed-area contribution of triangle pqr at corner p.
fn corner_area<T: Real>(p: Point3<T>, q: Point3<T>, r: Point3<T>) -> T {
    let obtuse_p = (q - p).dot(r - p) < T::zero();
    let obtuse_q = (p - q).dot(r - q) < T::zero();
    let obtuse_r = (p - r).dot(q - r) < T::zero();
    let eighth = T::of(0.125);
    if !(obtuse_p || obtuse_q || obtuse_r) {
        let cot_q = cot(p - q, r - q);
        let cot_r = cot(p - r, q - r);
        (p.dist_sq(r) * cot_q + p.dist_sq(q) * cot_r) * eighth
    } else {
        let area = geom::double_area(p, q, r) * T::half();
        if obtuse_p {
            area * T::half()
        } else {
            area * T::of(0.25)
        }
    }
}

fn check_interior<T: Real>(mesh: &TriangleMesh<T>, v: u32) -> Result<()> {
    if v as usize >= mesh.vertex_count() {
        return Err(Error::invalid(format!("vertex {v} out of range")));
    }
    if mesh.is_boundary(v as usize) {
        return Err(Error::invalid(format!("vertex {v} lies on the boundary")));
    }
    if !mesh.faces().iter().any(|f| f.contains(&v)) {
        return Err(Error::invalid(format!("vertex {v} is isolated")));
    }
    Ok(())
}

/// Compute Gaussian and mean curvature at every interior vertex in one
/// sweep over the faces.
///
/// `up`, when given, globally flips the area-weighted vertex normals if
/// their summed projection onto it is negative, fixing the sign of mean
/// curvature for open meshes whose winding is not known to be outward.
/// Closed, consistently wound meshes need no `up`.
pub fn curvature_field<T: Real>(
    mesh: &TriangleMesh<T>,
    up: Option<Point3<T>>,
) -> Result<CurvatureField<T>> {
    let n = mesh.vertices().len();
    let verts = mesh.vertices();
    let mut angle_sum = vec![T::zero(); n];
    let mut area = vec![T::zero(); n];
    let mut lap = vec![Point3::zero(); n];
    let mut normal = vec![Point3::zero(); n];
    let mut has_face = vec![false; n];

    for f in mesh.faces() {
        let [ia, ib, ic] = [f[0] as usize, f[1] as usize, f[2] as usize];
        let (a, b, c) = (verts[ia], verts[ib], verts[ic]);

        angle_sum[ia] += geom::angle_at(a, b, c);
        angle_sum[ib] += geom::angle_at(b, c, a);
        angle_sum[ic] += geom::angle_at(c, a, b);

        area[ia] += corner_area(a, b, c);
        area[ib] += corner_area(b, c, a);
        area[ic] += corner_area(c, a, b);

        let cot_a = cot(b - a, c - a);
        let cot_b = cot(a - b, c - b);
        let cot_c = cot(a - c, b - c);
        lap[ia] += (a - b).scale(cot_c) + (a - c).scale(cot_b);
        lap[ib] += (b - a).scale(cot_c) + (b - c).scale(cot_a);
        lap[ic] += (c - a).scale(cot_b) + (c - b).scale(cot_a);

        let face_normal = (b - a).cross(c - a);
        normal[ia] += face_normal;
        normal[ib] += face_normal;
        normal[ic] += face_normal;

        has_face[ia] = true;
        has_face[ib] = true;
        has_face[ic] = true;
    }

    let valid: Vec<bool> = (0..n)
        .map(|v| !mesh.is_boundary(v) && has_face[v] && area[v] > T::zero())
        .collect();
    if !valid.iter().any(|&v| v) {
        return Err(Error::invalid("mesh has no interior vertices"));
    }

    // A negative summed projection onto `up` means the winding points
    // away from it; flip every normal so signs read "convex = positive".
    let flip = match up {
        Some(u) => {
            let mut s = T::zero();
            for v in 0..n {
                if valid[v] {
                    s += normal[v].dot(u);
                }
            }
            if s < T::zero() {
                -T::one()
            } else {
                T::one()
            }
        }
        None => T::one(),
    };

    let full_turn = T::two() * T::pi();
    let mut gaussian = vec![T::zero(); n];
    let mut mean = vec![T::zero(); n];
    let mut deficit = vec![T::zero(); n];
    for v in 0..n {
        if !valid[v] {
            continue;
        }
        deficit[v] = full_turn - angle_sum[v];
        gaussian[v] = deficit[v] / area[v];
        let magnitude = lap[v].norm() / (T::of(4.0) * area[v]);
        let sign = if lap[v].dot(normal[v].scale(flip)) < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        mean[v] = sign * magnitude;
    }

    Ok(CurvatureField {
        gaussian,
        mean,
        mixed_area: area,
        deficit,
        valid,
    })
}

/// Reduce a curvature field to min/max and sign-count statistics.
/// `zero_tol` is the dead band around zero: vertices with |K| (or |H|)
/// below it count as neither positive nor negative.
pub fn curvature_features<T: Real>(
    field: &CurvatureField<T>,
    zero_tol: T,
) -> Result<CurvatureFeatures<T>> {
    assert!(zero_tol >= T::zero(), "zero_tol must be non-negative");
    let picked: Vec<usize> = (0..field.valid.len()).filter(|&v| field.valid[v]).collect();
    if picked.is_empty() {
        return Err(Error::invalid("curvature field has no valid vertices"));
    }

    let stats = |values: &[T]| {
        let mut min = values[picked[0]];
        let mut max = min;
        let mut pos = 0u64;
        let mut neg = 0u64;
        for &v in &picked {
            let x = values[v];
            if fcmp(x, min).is_lt() {
                min = x;
            }
            if fcmp(x, max).is_gt() {
                max = x;
            }
            if x > zero_tol {
                pos += 1;
            } else if x < -zero_tol {
                neg += 1;
            }
        }
        let ratio = if pos.max(neg) == 0 {
            T::zero()
        } else {
            T::of(pos.min(neg) as f64) / T::of(pos.max(neg) as f64)
        };
        let positive = if pos + neg == 0 {
            T::zero()
        } else {
            T::of(pos as f64) / T::of((pos + neg) as f64)
        };
        (min, max, ratio, positive)
    };

    let (min_gaussian, max_gaussian, ratio_gaussian, positive_gaussian) = stats(&field.gaussian);
    let (min_mean, max_mean, ratio_mean, positive_mean) = stats(&field.mean);
    Ok(CurvatureFeatures {
        min_gaussian,
        max_gaussian,
        min_mean,
        max_mean,
        ratio_gaussian,
        ratio_mean,
        positive_gaussian,
        positive_mean,
    })
}

/// Dump the field as CSV rows `vertex_id,K,H,A_mixed,valid` for external
/// plotting. Invalid vertices are included with their zero entries so
/// row indices match vertex ids.
pub fn write_csv<T: Real, W: Write>(field: &CurvatureField<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vertex_id", "K", "H", "A_mixed", "valid"])?;
    for v in 0..field.valid.len() {
        w.write_record(&[
            v.to_string(),
            format!("{}", field.gaussian[v]),
            format!("{}", field.mean[v]),
            format!("{}", field.mixed_area[v]),
            field.valid[v].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
