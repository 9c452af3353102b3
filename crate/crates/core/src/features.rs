//! Per-segment feature assembly.
//!
//! Every segment is summarized by 22 numbers in one fixed column order:
//! two baseline geometry values (containment radius, tip height), eight
//! curvature statistics, and the twelve-dimensional topological summary
//! of its persistence diagram. The order is canonical — downstream
//! tables, models, and importance rankings all index into it by name.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{curvature_features, curvature_field};
use crate::error::Result;
use crate::num::Real;
use crate::persistence::{self, DiagramConfig};
use crate::rng;
use crate::segment::{self, ExtractionConfig, Segment};
use crate::vectorize::{topo_features, TopoFeatures, VectorizeConfig};

/// Baseline block: geometry of the protrusion itself.
pub const BASELINE_NAMES: [&str; 2] = ["radius", "height"];

/// Curvature block: aggregate statistics of the discrete curvature field.
pub const CURVATURE_NAMES: [&str; 8] = [
    "min_gaussian",
    "max_gaussian",
    "min_mean",
    "max_mean",
    "ratio_gaussian",
    "ratio_mean",
    "positive_gaussian",
    "positive_mean",
];

/// Topology block, one summary per diagram dimension.
pub const TOPO_NAMES: [&str; 12] = TopoFeatures::<f64>::NAMES;

/// Total feature count across all blocks.
pub const FEATURE_COUNT: usize = 22;

/// All column names in canonical order: baseline, curvature, topology.
pub fn feature_names() -> Vec<&'static str> {
    BASELINE_NAMES
        .iter()
        .chain(CURVATURE_NAMES.iter())
        .chain(TOPO_NAMES.iter())
        .copied()
        .collect()
}

/// Knobs for the whole per-segment pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct FeatureConfig<T> {
    /// RANSAC settings for the per-segment base plane.
    pub extraction: ExtractionConfig<T>,
    /// Dead band below which a curvature value counts as zero.
    pub curvature_zero_tol: T,
    pub diagram: DiagramConfig<T>,
    pub vectorize: VectorizeConfig<T>,
}

impl<T: Real> Default for FeatureConfig<T> {
    fn default() -> Self {
        Self {
            extraction: ExtractionConfig::default(),
            curvature_zero_tol: T::of(1e-8),
            diagram: DiagramConfig::default(),
            vectorize: VectorizeConfig::default(),
        }
    }
}

/// Compute all [`FEATURE_COUNT`] features of one segment, in canonical
/// order. `seed` drives the base-plane RANSAC and the diagram subsample;
/// everything else is deterministic in the segment.
pub fn featurize<T: Real>(
    segment: &Segment<T>,
    cfg: &FeatureConfig<T>,
    seed: u64,
) -> Result<Vec<T>> {
    let names: Vec<String> = feature_names().iter().map(|s| s.to_string()).collect();
    let out = featurize_named(segment, &names, cfg, seed)?;
    debug_assert_eq!(out.len(), FEATURE_COUNT);
    Ok(out)
}

/// Compute only the named features, in the order requested. Blocks no
/// name touches are skipped entirely — a caller that ignores topology
/// never pays for a persistence diagram. Values and seeding match
/// [`featurize`] bit for bit.
pub fn featurize_named<T: Real>(
    segment: &Segment<T>,
    names: &[String],
    cfg: &FeatureConfig<T>,
    seed: u64,
) -> Result<Vec<T>> {
    let canonical = feature_names();
    for n in names {
        if !canonical.contains(&n.as_str()) {
            return Err(crate::Error::invalid(format!("unknown feature `{n}`")));
        }
    }
    let wants = |block: &[&str]| names.iter().any(|n| block.contains(&n.as_str()));
    let need_curvature = wants(&CURVATURE_NAMES);
    let need_plane = need_curvature || names.iter().any(|n| n == "height");
    let need_radius = need_plane || names.iter().any(|n| n == "radius");
    let need_topo = wants(&TOPO_NAMES);

    let mut have: std::collections::BTreeMap<&str, T> = std::collections::BTreeMap::new();
    if need_radius {
        let radius = segment::radius_feature(segment)?;
        have.insert("radius", radius);
        if need_plane {
            let ex = ExtractionConfig {
                seed,
                ..cfg.extraction.clone()
            };
            let plane = segment::base_plane(segment, radius, &ex)?;
            have.insert("height", plane.distance(segment.center));
            if need_curvature {
                // The plane normal points at the tip, which pins the
                // sign of the mean curvature regardless of how the
                // segment is oriented in space.
                let field = curvature_field(&segment.mesh, Some(plane.normal))?;
                let curv = curvature_features(&field, cfg.curvature_zero_tol)?;
                let vals = [
                    curv.min_gaussian,
                    curv.max_gaussian,
                    curv.min_mean,
                    curv.max_mean,
                    curv.ratio_gaussian,
                    curv.ratio_mean,
                    curv.positive_gaussian,
                    curv.positive_mean,
                ];
                for (name, v) in CURVATURE_NAMES.iter().zip(vals) {
                    have.insert(name, v);
                }
            }
        }
    }
    if need_topo {
        let dcfg = DiagramConfig {
            seed: rng::derive(seed, "subsample"),
            ..cfg.diagram.clone()
        };
        let cloud = segment.mesh.point_cloud();
        let diag = persistence::diagram(&cloud, &dcfg)?;
        let topo = topo_features(&diag, &cfg.vectorize);
        for (name, v) in TOPO_NAMES.iter().zip(topo.to_array()) {
            have.insert(name, v);
        }
    }
    Ok(names.iter().map(|n| have[n.as_str()]).collect())
}

/// Featurize many `(id, segment)` pairs in parallel. Per-segment seeds
/// are derived from `seed` and the id, so results do not depend on the
/// order of the input slice.
pub fn featurize_batch<T: Real>(
    items: &[(String, Segment<T>)],
    cfg: &FeatureConfig<T>,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    items
        .par_iter()
        .map(|(id, s)| featurize(s, cfg, rng::derive(seed, id)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::synth::shapes::disk_heightfield;

    fn small_cfg() -> FeatureConfig<f64> {
        let mut cfg = FeatureConfig::default();
        cfg.diagram.n_subsample = 200;
        cfg
    }

    /// A dome small enough that unit tests stay fast.
    fn dome_segment() -> Segment<f64> {
        let mesh = disk_heightfield(190.0, 12.0, |x: f64, y: f64| {
            let rho2 = x * x + y * y;
            (80.0 - rho2 / 180.0).max(0.0)
        });
        let ex = ExtractionConfig {
            r: 170.0,
            delta: 40.0,
            seed: 7,
            ..ExtractionConfig::default()
        };
        segment::extract_segment(&mesh, Point3::new(25.0, -10.0, 60.0), &ex).unwrap()
    }

    #[test]
    fn names_align_with_vector_arity() {
        let names = feature_names();
        assert_eq!(names.len(), FEATURE_COUNT);
        let vals = featurize(&dome_segment(), &small_cfg(), 3).unwrap();
        assert_eq!(vals.len(), FEATURE_COUNT);
        assert!(vals.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn same_seed_is_bitwise_deterministic() {
        let seg = dome_segment();
        let cfg = small_cfg();
        assert_eq!(
            featurize(&seg, &cfg, 11).unwrap(),
            featurize(&seg, &cfg, 11).unwrap()
        );
    }

    #[test]
    fn dome_is_convex_toward_its_base_plane() {
        let vals = featurize(&dome_segment(), &small_cfg(), 3).unwrap();
        let names = feature_names();
        let at = |n: &str| vals[names.iter().position(|&x| x == n).unwrap()];
        assert!(at("positive_mean") > 0.5, "positive_mean {}", at("positive_mean"));
        assert!(at("positive_gaussian") > 0.5);
        assert!(at("height") > 40.0 && at("height") < 90.0);
    }

    #[test]
    fn rigid_motion_changes_nothing_material() {
        let seg = dome_segment();
        let cfg = small_cfg();
        let base = featurize(&seg, &cfg, 5).unwrap();

        // Quarter turn about z, then a flip about x (tip points down),
        // then a translation: a general orientation.
        let rot = |p: Point3<f64>| {
            let (x, y, z) = (p.y, -p.x, p.z);
            Point3::new(x + 310.0, -z + 44.0, y - 95.0)
        };
        let mut moved = seg.clone();
        moved.mesh = crate::mesh::TriangleMesh::new(
            seg.mesh.vertices().iter().map(|&v| rot(v)).collect(),
            seg.mesh.faces().to_vec(),
        )
        .unwrap();
        moved.center = rot(seg.center);
        moved.seed_point = rot(seg.seed_point);
        let turned = featurize(&moved, &cfg, 5).unwrap();

        let names = feature_names();
        for (i, name) in names.iter().enumerate() {
            let (a, b) = (base[i], turned[i]);
            match *name {
                // Count-based features must match exactly.
                "radius" | "short_bars_0" | "short_bars_1" | "ratio_gaussian" | "ratio_mean"
                | "positive_gaussian" | "positive_mean" => {
                    assert_eq!(a, b, "{name}: {a} vs {b}")
                }
                _ => {
                    let rel = (a - b).abs() / a.abs().max(1e-12);
                    assert!(rel < 1e-6, "{name}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn named_subset_matches_the_full_vector_bitwise() {
        let seg = dome_segment();
        let cfg = small_cfg();
        let full = featurize(&seg, &cfg, 13).unwrap();
        let names = feature_names();
        let ask: Vec<String> = ["amp_wasserstein_1", "radius", "positive_mean"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let got = featurize_named(&seg, &ask, &cfg, 13).unwrap();
        for (name, v) in ask.iter().zip(&got) {
            let i = names.iter().position(|n| n == name).unwrap();
            assert_eq!(*v, full[i], "{name}");
        }
        assert!(featurize_named(&seg, &["no_such".to_string()], &cfg, 13).is_err());
    }

    #[test]
    fn untouched_blocks_are_never_computed() {
        let seg = dome_segment();
        // A one-simplex budget makes any diagram attempt fail loudly, so
        // success proves the topology block was skipped.
        let mut cfg = small_cfg();
        cfg.diagram.simplex_cap = 1;
        let ask: Vec<String> = ["radius", "height", "max_mean"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(featurize_named(&seg, &ask, &cfg, 3).is_ok());
        let topo: Vec<String> = vec!["entropy_0".to_string()];
        assert!(featurize_named(&seg, &topo, &cfg, 3).is_err());
    }

    #[test]
    fn batch_matches_singles_and_ignores_order() {
        let seg = dome_segment();
        let cfg = small_cfg();
        let items = vec![("a".to_string(), seg.clone()), ("b".to_string(), seg)];
        let batch = featurize_batch(&items, &cfg, 9).unwrap();
        let swapped: Vec<(String, Segment<f64>)> =
            items.iter().rev().cloned().collect();
        let batch_rev = featurize_batch(&swapped, &cfg, 9).unwrap();
        assert_eq!(batch[0], batch_rev[1]);
        assert_eq!(batch[1], batch_rev[0]);
        assert_eq!(
            batch[0],
            featurize(&items[0].1, &cfg, rng::derive(9, "a")).unwrap()
        );
        // Same segment, different id: different subsample seed.
        assert_eq!(batch.len(), 2);
    }
}
