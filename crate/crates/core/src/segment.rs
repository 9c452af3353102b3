//! Candidate protrusion segments.
//!
//! A segment is grown from a seed point: gather the ball of radius
//! `r + delta`, fit the local base plane with RANSAC, snap to the vertex
//! furthest from that plane (the protrusion tip), and cut the ball of
//! radius `r` around the tip. The baseline shape features — containment
//! radius and tip height — are computed against the same kind of plane
//! fit.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::geom::Point3;
use crate::linalg::eigh_sym;
use crate::mesh::ply::{self, PlyFormat};
use crate::mesh::{PointCloud, TriangleMesh};
use crate::num::{fcmp, Real};
use crate::rng;
use crate::spatial::KdTree;
use crate::{Error, Result};

/// Oriented plane `normal . p = offset` with the inlier count of the
/// fit that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    /// Unit normal.
    pub normal: Point3<T>,
    /// Signed distance of the plane from the origin along the normal.
    pub offset: T,
    /// Points within tolerance of the plane when it was fitted.
    pub inlier_count: usize,
}

impl<T: Real> Plane<T> {
    pub fn signed_distance(&self, p: Point3<T>) -> T {
        self.normal.dot(p) - self.offset
    }

    pub fn distance(&self, p: Point3<T>) -> T {
        self.signed_distance(p).abs()
    }
}

/// Class assigned to a segment. Fresh extractions are `Unlabeled`;
/// `None` marks a reviewed segment that is not a papilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fungiform,
    Filiform,
    None,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fungiform => "fungiform",
            Label::Filiform => "filiform",
            Label::None => "none",
            Label::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fungiform" => Ok(Label::Fungiform),
            "filiform" => Ok(Label::Filiform),
            "none" => Ok(Label::None),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// A circular patch of surface centred on a protrusion tip.
#[derive(Debug, Clone)]
pub struct Segment<T> {
    pub mesh: TriangleMesh<T>,
    /// The snapped tip: always one of the mesh vertices, and every
    /// vertex lies within `cut_radius` of it.
    pub center: Point3<T>,
    /// Where the extraction was seeded, kept for provenance.
    pub seed_point: Point3<T>,
    pub cut_radius: T,
    pub label: Label,
    pub participant: String,
    pub group_attrs: BTreeMap<String, String>,
}

/// Knobs for segment extraction. Distances are in the mesh's length
/// unit (micrometres for scan data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig<T> {
    /// Cut radius around the tip.
    pub r: T,
    /// Extra reach when gathering the plane-fit neighborhood.
    pub delta: T,
    pub ransac_iters: usize,
    pub ransac_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for ExtractionConfig<T> {
    fn default() -> Self {
        Self {
            r: T::of(450.0),
            delta: T::of(100.0),
            ransac_iters: 200,
            ransac_tol: T::of(15.0),
            seed: 0,
        }
    }
}

/// Least-squares plane through a point set: centroid plus the smallest
/// covariance eigenvector. None when the points do not span a plane.
fn fit_plane_lsq<T: Real>(pts: &[Point3<T>]) -> Option<Plane<T>> {
    if pts.len() < 3 {
        return None;
    }
    let inv = T::one() / T::of(pts.len() as f64);
    let centroid = pts
        .iter()
        .fold(Point3::zero(), |acc, &p| acc + p)
        .scale(inv);
    let mut cov = vec![vec![T::zero(); 3]; 3];
    for p in pts {
        let d = *p - centroid;
        let v = [d.x, d.y, d.z];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += v[i] * v[j];
            }
        }
    }
    let eig = eigh_sym(&cov);
    let smallest = &eig.vectors[2];
    let normal = Point3::new(smallest[0], smallest[1], smallest[2]).normalized()?;
    Some(Plane {
        normal,
        offset: normal.dot(centroid),
        inlier_count: pts.len(),
    })
}

/// RANSAC plane fit: best of `iters` random 3-point hypotheses by
/// inlier count (|signed distance| <= tol), refined by least squares
/// over those inliers, with the inlier count recounted against the
/// refined plane. Deterministic for a fixed seed.
pub fn ransac_plane<T: Real>(
    points: &PointCloud<T>,
    iters: usize,
    tol: T,
    seed: u64,
) -> Result<Plane<T>> {
    let pts = &points.points;
    if pts.len() < 3 {
        return Err(Error::invalid("plane fit needs at least 3 points"));
    }
    let mut rng = rng::rng_from(seed);
    let mut best: Option<(usize, Point3<T>, T)> = None;
    for _ in 0..iters {
        let idx = index_sample(&mut rng, pts.len(), 3);
        let a = pts[idx.index(0)];
        let b = pts[idx.index(1)];
        let c = pts[idx.index(2)];
        let Some(unit) = (b - a).cross(c - a).normalized() else {
            continue; // degenerate triple
        };
        let off = unit.dot(a);
        let count = pts.iter().filter(|p| (unit.dot(**p) - off).abs() <= tol).count();
        if best.as_ref().map_or(true, |&(bc, _, _)| count > bc) {
            best = Some((count, unit, off));
        }
    }
    let Some((_, unit, off)) = best else {
        return Err(Error::invalid(
            "no plane hypothesis found (are the points collinear?)",
        ));
    };
    let inliers: Vec<Point3<T>> = pts
        .iter()
        .copied()
        .filter(|p| (unit.dot(*p) - off).abs() <= tol)
        .collect();
    let refined = fit_plane_lsq(&inliers).unwrap_or(Plane {
        normal: unit,
        offset: off,
        inlier_count: 0,
    });
    let inlier_count = pts.iter().filter(|p| refined.distance(**p) <= tol).count();
    Ok(Plane {
        inlier_count,
        ..refined
    })
}

/// Index of the point furthest from the plane (unsigned distance); ties
/// go to the lowest index.
pub fn local_maximum<T: Real>(points: &PointCloud<T>, plane: &Plane<T>) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::invalid("empty point cloud"));
    }
    let mut best = 0;
    let mut best_d = plane.distance(points.points[0]);
    for (i, &p) in points.points.iter().enumerate().skip(1) {
        let d = plane.distance(p);
        if fcmp(d, best_d).is_gt() {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Extract one segment around `seed_point`. Builds a spatial index for
/// the whole surface; use [`scan_segments`] to amortize that over many
/// extractions.
pub fn extract_segment<T: Real>(
    surface: &TriangleMesh<T>,
    seed_point: Point3<T>,
    cfg: &ExtractionConfig<T>,
) -> Result<Segment<T>> {
    let tree = KdTree::build(surface.vertices());
    extract_with_tree(surface, &tree, seed_point, cfg)
}

fn extract_with_tree<T: Real>(
    surface: &TriangleMesh<T>,
    tree: &KdTree<T>,
    seed_point: Point3<T>,
    cfg: &ExtractionConfig<T>,
) -> Result<Segment<T>> {
    let neighborhood = tree.radius(seed_point, cfg.r + cfg.delta);
    if neighborhood.len() < 3 {
        return Err(Error::invalid(
            "seed neighborhood has fewer than 3 points",
        ));
    }
    let cloud = PointCloud::new(
        neighborhood
            .iter()
            .map(|&i| surface.vertices()[i as usize])
            .collect(),
    );
    let plane = ransac_plane(
        &cloud,
        cfg.ransac_iters,
        cfg.ransac_tol,
        rng::derive(cfg.seed, "base-plane"),
    )?;
    let tip = local_maximum(&cloud, &plane)?;
    let center = cloud.points[tip];
    let keep = tree.radius(center, cfg.r);
    let (mesh, _) = surface.submesh(&keep)?;
    Ok(Segment {
        mesh,
        center,
        seed_point,
        cut_radius: cfg.r,
        label: Label::Unlabeled,
        participant: String::new(),
        group_attrs: BTreeMap::new(),
    })
}

/// Repeatedly extract segments from seed vertices drawn in a seeded
/// random order, skipping seeds within `cfg.r` of an already-accepted
/// center. Stops at `max_segments` or when every vertex is covered.
/// Failed extractions (degenerate neighborhoods) are skipped silently.
pub fn scan_segments<T: Real>(
    surface: &TriangleMesh<T>,
    cfg: &ExtractionConfig<T>,
    max_segments: usize,
) -> Vec<Segment<T>> {
    let n = surface.vertex_count();
    if n == 0 || max_segments == 0 {
        return Vec::new();
    }
    let tree = KdTree::build(surface.vertices());
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng::rng_from(rng::derive(cfg.seed, "scan-order")));

    let mut accepted: Vec<Segment<T>> = Vec::new();
    for (attempt, &v) in order.iter().enumerate() {
        if accepted.len() >= max_segments {
            break;
        }
        let p = surface.vertices()[v as usize];
        if accepted.iter().any(|s| s.center.dist(p) <= cfg.r) {
            continue;
        }
        let sub = ExtractionConfig {
            seed: rng::derive(cfg.seed, &format!("extract-{attempt}")),
            ..cfg.clone()
        };
        if let Ok(seg) = extract_with_tree(surface, &tree, p, &sub) {
            accepted.push(seg);
        }
    }
    accepted
}

/// Smallest radius from {10, 20, 30, …} whose ball around the center
/// contains at least 90% of the segment vertices, capped at the cut
/// radius. The 90% test is exact integer arithmetic.
pub fn radius_feature<T: Real>(segment: &Segment<T>) -> Result<T> {
    let verts = segment.mesh.vertices();
    if verts.is_empty() {
        return Err(Error::invalid("segment has no vertices"));
    }
    let step = T::of(10.0);
    let mut i = step;
    loop {
        if fcmp(i, segment.cut_radius).is_ge() {
            return Ok(segment.cut_radius);
        }
        let within = verts.iter().filter(|v| v.dist(segment.center) <= i).count();
        if 10 * within >= 9 * verts.len() {
            return Ok(i);
        }
        i += step;
    }
}

/// RANSAC-fit base plane of the vertices within `radius` of the center,
/// with its normal oriented toward the center (the protrusion side).
pub fn base_plane<T: Real>(
    segment: &Segment<T>,
    radius: T,
    cfg: &ExtractionConfig<T>,
) -> Result<Plane<T>> {
    let pts: Vec<Point3<T>> = segment
        .mesh
        .vertices()
        .iter()
        .copied()
        .filter(|p| p.dist(segment.center) <= radius)
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid(
            "height sub-region has fewer than 3 points",
        ));
    }
    let mut plane = ransac_plane(
        &PointCloud::new(pts),
        cfg.ransac_iters,
        cfg.ransac_tol,
        rng::derive(cfg.seed, "height-plane"),
    )?;
    if plane.signed_distance(segment.center) < T::zero() {
        plane.normal = plane.normal.scale(-T::one());
        plane.offset = -plane.offset;
    }
    Ok(plane)
}

/// Tip height over the local base plane: RANSAC-fit a plane to the
/// vertices within `radius` of the center and return the center's
/// unsigned distance from it. `radius` is typically the value of
/// [`radius_feature`] so the plane hugs the protrusion's own base.
pub fn height_feature<T: Real>(
    segment: &Segment<T>,
    radius: T,
    cfg: &ExtractionConfig<T>,
) -> Result<T> {
    Ok(base_plane(segment, radius, cfg)?.distance(segment.center))
}

/// On-disk companion of a segment mesh. Numeric fields are stored as
/// f64 regardless of the in-memory scalar type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentSidecar {
    pub id: String,
    pub participant: String,
    pub label: Label,
    pub center: [f64; 3],
    pub seed_point: [f64; 3],
    pub cut_radius: f64,
    #[serde(default)]
    pub group_attrs: BTreeMap<String, String>,
}

/// Write `{id}.ply` (binary) and `{id}.json` into `dir`.
pub fn save_segment<T: Real>(segment: &Segment<T>, dir: impl AsRef<Path>, id: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    ply::save(
        &segment.mesh,
        dir.join(format!("{id}.ply")),
        PlyFormat::BinaryLittleEndian,
    )?;
    let sidecar = SegmentSidecar {
        id: id.to_string(),
        participant: segment.participant.clone(),
        label: segment.label,
        center: [segment.center.x.f64(), segment.center.y.f64(), segment.center.z.f64()],
        seed_point: [
            segment.seed_point.x.f64(),
            segment.seed_point.y.f64(),
            segment.seed_point.z.f64(),
        ],
        cut_radius: segment.cut_radius.f64(),
        group_attrs: segment.group_attrs.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    fs::write(dir.join(format!("{id}.json")), json)?;
    Ok(())
}

/// Load a segment previously written by [`save_segment`].
pub fn load_segment<T: Real>(dir: impl AsRef<Path>, id: &str) -> Result<Segment<T>> {
    let dir = dir.as_ref();
    let mesh = ply::load(dir.join(format!("{id}.ply")))?;
    let text = fs::read_to_string(dir.join(format!("{id}.json")))?;
    let sidecar: SegmentSidecar = serde_json::from_str(&text)?;
    Ok(Segment {
        mesh,
        center: Point3::new(
            T::of(sidecar.center[0]),
            T::of(sidecar.center[1]),
            T::of(sidecar.center[2]),
        ),
        seed_point: Point3::new(
            T::of(sidecar.seed_point[0]),
            T::of(sidecar.seed_point[1]),
            T::of(sidecar.seed_point[2]),
        ),
        cut_radius: T::of(sidecar.cut_radius),
        label: sidecar.label,
        participant: sidecar.participant,
        group_attrs: sidecar.group_attrs,
    })
}
