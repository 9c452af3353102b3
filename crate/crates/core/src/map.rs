//! Whole-surface papillae mapping.
//!
//! A seed grid is swept over the surface; each seed fits a local base
//! plane, then walks uphill (highest vertex within a small ball) until it
//! reaches a tip. Tips are deduplicated, a segment is cut around each and
//! classified with a trained model, and everything the model calls
//! featureless ground is dropped. What remains is the map: one detection
//! per protrusion with its predicted type and decision margin.
//!
//! The learning side is `f64`-typed, so mapping is too.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{featurize_named, FeatureConfig};
use crate::geom::Point3;
use crate::learn::ClassifierModel;
use crate::mesh::TriangleMesh;
use crate::num::fcmp;
use crate::rng;
use crate::segment::Label;
use crate::spatial::KdTree;
use crate::synth::gen::Placement;
use crate::{Error, Result};

pub const MAP_SCHEMA: &str = "papillae/map-v1";

/// Knobs for the sweep. Lengths are in the surface's unit (µm for scan-
/// scale data). Cut radius and plane-fit reach come from
/// `features.extraction`, so mapped segments match trained ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    /// Seed grid spacing.
    pub grid_step: f64,
    /// Ball radius of one uphill hop.
    pub snap_radius: f64,
    /// Hop budget per walk; walks almost always fix within a few hops.
    pub max_hops: usize,
    /// Tips closer together than this merge into one candidate.
    pub dedup_radius: f64,
    /// Candidates lower than this over their base plane are dropped
    /// before classification; 0 sends everything to the model.
    pub min_prominence: f64,
    pub features: FeatureConfig<f64>,
    pub seed: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            grid_step: 200.0,
            snap_radius: 150.0,
            max_hops: 32,
            dedup_radius: 120.0,
            min_prominence: 0.0,
            features: FeatureConfig::default(),
            seed: 0,
        }
    }
}

/// A deduplicated tip candidate, before classification.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub tip: Point3<f64>,
    /// Height of the tip over the seed's base plane.
    pub prominence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub center: Point3<f64>,
    #[serde(rename = "type")]
    pub kind: String,
    /// Decision margin: winning class score minus the runner-up.
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMap {
    pub schema: String,
    pub detections: Vec<Detection>,
}

impl SurfaceMap {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<SurfaceMap> {
        let map: SurfaceMap = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if map.schema != MAP_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported map schema `{}` (this build reads `{MAP_SCHEMA}`)",
                map.schema
            )));
        }
        Ok(map)
    }
}

/// Highest vertex (unsigned plane distance) within `r` of `from`; ties go
/// to the lowest vertex index.
fn highest_within(
    tree: &KdTree<f64>,
    verts: &[Point3<f64>],
    plane: &crate::segment::Plane<f64>,
    from: Point3<f64>,
    r: f64,
) -> u32 {
    let mut ball = tree.radius(from, r);
    ball.sort_unstable();
    let mut best = ball[0];
    let mut best_d = plane.distance(verts[best as usize]);
    for &v in &ball[1..] {
        let d = plane.distance(verts[v as usize]);
        if fcmp(d, best_d).is_gt() {
            best = v;
            best_d = d;
        }
    }
    best
}

/// Sweep the seed grid and return deduplicated tip candidates in a
/// deterministic order.
pub fn detect_tips(surface: &TriangleMesh<f64>, cfg: &MapConfig) -> Vec<Candidate> {
    let verts = surface.vertices();
    if verts.is_empty() {
        return Vec::new();
    }
    let tree = KdTree::build(verts);
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in verts {
        lo_x = lo_x.min(v.x);
        hi_x = hi_x.max(v.x);
        lo_y = lo_y.min(v.y);
        hi_y = hi_y.max(v.y);
    }
    let step = cfg.grid_step.max(1.0);
    let nx = (((hi_x - lo_x) / step).ceil() as usize).max(1);
    let ny = (((hi_y - lo_y) / step).ceil() as usize).max(1);
    let reach = cfg.features.extraction.r + cfg.features.extraction.delta;

    let seeds: Vec<(usize, f64, f64)> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            (
                k,
                lo_x + step * (i as f64 + 0.5),
                lo_y + step * (j as f64 + 0.5),
            )
        })
        .collect();

    let mut tips: Vec<Option<(u32, f64)>> = Vec::new();
    seeds
        .par_iter()
        .map(|&(k, x, y)| {
            let start = tree.k_nearest(Point3::new(x, y, 0.0), 1)[0].0;
            let hood = tree.radius(verts[start as usize], reach);
            if hood.len() < 3 {
                return None;
            }
            let cloud = crate::mesh::PointCloud::new(
                hood.iter().map(|&i| verts[i as usize]).collect(),
            );
            let plane = crate::segment::ransac_plane(
                &cloud,
                cfg.features.extraction.ransac_iters,
                cfg.features.extraction.ransac_tol,
                rng::derive(cfg.seed, &format!("map-plane-{k}")),
            )
            .ok()?;
            let mut cur = start;
            for _ in 0..cfg.max_hops {
                let next =
                    highest_within(&tree, verts, &plane, verts[cur as usize], cfg.snap_radius);
                if next == cur {
                    break;
                }
                cur = next;
            }
            let prominence = plane.distance(verts[cur as usize]);
            (prominence >= cfg.min_prominence).then_some((cur, prominence))
        })
        .collect_into_vec(&mut tips);

    // Seeds are in grid order, so dedup keeps the first (lowest-k) walk
    // that reached each tip.
    let mut out: Vec<Candidate> = Vec::new();
    for (vertex, prominence) in tips.into_iter().flatten() {
        let tip = verts[vertex as usize];
        if out.iter().all(|c| c.tip.dist(tip) > cfg.dedup_radius) {
            out.push(Candidate { tip, prominence });
        }
    }
    out
}

/// Detect, classify, and keep everything the model does not call
/// featureless ground.
pub fn map_surface(
    surface: &TriangleMesh<f64>,
    model: &ClassifierModel,
    cfg: &MapConfig,
) -> Result<SurfaceMap> {
    let candidates = detect_tips(surface, cfg);
    let tree = KdTree::build(surface.vertices());

    let rows: Vec<Option<Vec<f64>>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let keep = tree.radius(c.tip, cfg.features.extraction.r);
            if keep.len() < 3 {
                return Ok(None);
            }
            let (mesh, _) = surface.submesh(&keep)?;
            let segment = crate::segment::Segment {
                mesh,
                center: c.tip,
                seed_point: c.tip,
                cut_radius: cfg.features.extraction.r,
                label: Label::Unlabeled,
                participant: String::new(),
                group_attrs: Default::default(),
            };
            featurize_named(
                &segment,
                &model.feature_names,
                &cfg.features,
                rng::derive(cfg.seed, &format!("candidate-{i}")),
            )
            .map(Some)
        })
        .collect::<Result<_>>()?;

    let mut kept: Vec<&Candidate> = Vec::new();
    let mut feats: Vec<Vec<f64>> = Vec::new();
    for (c, row) in candidates.iter().zip(rows) {
        if let Some(row) = row {
            kept.push(c);
            feats.push(row);
        }
    }
    let detections = model
        .predict_rows_scored(&feats)
        .into_iter()
        .zip(kept)
        .filter(|((kind, _), _)| kind != Label::None.as_str())
        .map(|((kind, score), c)| Detection {
            center: c.tip,
            kind,
            score,
        })
        .collect();
    Ok(SurfaceMap {
        schema: MAP_SCHEMA.to_string(),
        detections,
    })
}

/// How a map compares against ground-truth placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub truths: usize,
    /// Truths with a detection within tolerance.
    pub localized: usize,
    /// Localized truths whose nearest detection also has the right type.
    pub correct: usize,
    /// Detections that match no truth within tolerance.
    pub spurious: usize,
}

impl MatchReport {
    pub fn correct_fraction(&self) -> f64 {
        if self.truths == 0 {
            return 0.0;
        }
        self.correct as f64 / self.truths as f64
    }
}

/// Score detections against the generator's placement list: each truth is
/// matched to its nearest detection within `tol` (3D distance to the true
/// apex).
pub fn match_detections(
    detections: &[Detection],
    truths: &[Placement<f64>],
    tol: f64,
) -> MatchReport {
    let mut used = vec![false; detections.len()];
    let mut localized = 0;
    let mut correct = 0;
    for t in truths {
        let Some((i, d)) = detections
            .iter()
            .enumerate()
            .filter(|(i, d)| !used[*i] && d.center.dist(t.center) <= tol)
            .min_by(|(_, a), (_, b)| {
                fcmp(a.center.dist(t.center), b.center.dist(t.center))
            })
        else {
            continue;
        };
        used[i] = true;
        localized += 1;
        if d.kind == t.label.as_str() {
            correct += 1;
        }
    }
    MatchReport {
        truths: truths.len(),
        localized,
        correct,
        spurious: used.iter().filter(|u| !**u).count(),
    }
}

fn svg_color(kind: &str) -> &'static str {
    match kind {
        "fungiform" => "#2b6cb0",
        "filiform" => "#d69e2e",
        _ => "#718096",
    }
}

/// Overhead SVG plot: ground-truth footprints as outline circles,
/// detections as filled dots, colored by type. `width`/`depth` bound the
/// drawing area; the y axis is flipped so the plot reads like a map.
pub fn overlay_svg(
    detections: &[Detection],
    truths: &[Placement<f64>],
    width: f64,
    depth: f64,
) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {depth}\" \
         width=\"800\" height=\"{}\">\n",
        (800.0 * depth / width.max(1.0)).round()
    ));
    s.push_str(&format!(
        "<rect width=\"{width}\" height=\"{depth}\" fill=\"#f7fafc\"/>\n"
    ));
    for t in truths {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"8\"/>\n",
            t.site.x,
            depth - t.site.y,
            t.footprint,
            svg_color(t.label.as_str()),
        ));
    }
    for d in detections {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"30\" fill=\"{}\"><title>{} margin {:.3}</title></circle>\n",
            d.center.x,
            depth - d.center.y,
            svg_color(&d.kind),
            d.kind,
            d.score,
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{train_logistic, FeatureTable, LogisticConfig, RowMeta};
    use crate::synth::gen::{gen_corpus, gen_sheet, SynthConfig};

    /// Baseline + curvature columns only: crop-size-sensitive radius is
    /// excluded, and skipping topology keeps the test quick.
    fn map_feature_names() -> Vec<String> {
        let mut names = vec!["height".to_string()];
        names.extend(crate::features::CURVATURE_NAMES.iter().map(|s| s.to_string()));
        names
    }

    fn quick_model(seed: u64) -> ClassifierModel {
        let names = map_feature_names();
        let cfg = FeatureConfig::default();
        let corpus = gen_corpus(&SynthConfig::default(), 8, 2, seed).unwrap();
        let mut table = FeatureTable::new(names.clone());
        let rows: Vec<Vec<f64>> = corpus
            .par_iter()
            .map(|e| {
                featurize_named(&e.segment, &names, &cfg, rng::derive(seed, &e.id)).unwrap()
            })
            .collect();
        for (e, row) in corpus.iter().zip(rows) {
            table
                .push_row(
                    RowMeta {
                        id: e.id.clone(),
                        participant: e.segment.participant.clone(),
                        label_type: e.segment.label.as_str().to_string(),
                        label_gender: String::new(),
                        label_age_group: String::new(),
                    },
                    row,
                )
                .unwrap();
        }
        train_logistic(&table, "label_type", &LogisticConfig::default()).unwrap()
    }

    fn quick_map_cfg() -> MapConfig {
        MapConfig {
            min_prominence: 40.0,
            ..MapConfig::default()
        }
    }

    #[test]
    fn small_sheet_is_mapped_correctly() {
        let synth = SynthConfig::default();
        let (sheet, truths) = gen_sheet(&synth, 3000.0, 3000.0, 21).unwrap();
        let model = quick_model(5);
        let cfg = quick_map_cfg();
        let map = map_surface(&sheet, &model, &cfg).unwrap();
        let report = match_detections(&map.detections, &truths, 50.0);
        assert_eq!(report.truths, truths.len());
        assert!(
            report.correct_fraction() >= 0.9,
            "correct {}/{} (spurious {})",
            report.correct,
            report.truths,
            report.spurious
        );
        assert!(report.spurious <= truths.len() / 4 + 1, "{report:?}");
    }

    #[test]
    fn mapping_is_deterministic() {
        let synth = SynthConfig::default();
        let (sheet, _) = gen_sheet(&synth, 1500.0, 1500.0, 3).unwrap();
        let model = quick_model(6);
        let cfg = quick_map_cfg();
        let a = serde_json::to_string(&map_surface(&sheet, &model, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&map_surface(&sheet, &model, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn match_report_arithmetic() {
        let truths = vec![
            Placement {
                center: Point3::new(0.0, 0.0, 100.0),
                site: Point3::new(0.0, 0.0, 0.0),
                label: Label::Fungiform,
                footprint: 400.0,
                height: 200.0,
            },
            Placement {
                center: Point3::new(1000.0, 0.0, 80.0),
                site: Point3::new(1000.0, 0.0, 0.0),
                label: Label::Filiform,
                footprint: 170.0,
                height: 150.0,
            },
            Placement {
                center: Point3::new(0.0, 1000.0, 80.0),
                site: Point3::new(0.0, 1000.0, 0.0),
                label: Label::Filiform,
                footprint: 170.0,
                height: 150.0,
            },
        ];
        let detections = vec![
            // Within 50 of truth 0, right type.
            Detection {
                center: Point3::new(30.0, 0.0, 100.0),
                kind: "fungiform".into(),
                score: 1.0,
            },
            // Within 50 of truth 1, wrong type.
            Detection {
                center: Point3::new(1000.0, 20.0, 80.0),
                kind: "fungiform".into(),
                score: 0.5,
            },
            // Matches nothing.
            Detection {
                center: Point3::new(5000.0, 5000.0, 0.0),
                kind: "filiform".into(),
                score: 0.2,
            },
        ];
        let report = match_detections(&detections, &truths, 50.0);
        assert_eq!(
            report,
            MatchReport {
                truths: 3,
                localized: 2,
                correct: 1,
                spurious: 1
            }
        );
        assert!((report.correct_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overlay_svg_draws_every_marker() {
        let truths = vec![Placement {
            center: Point3::new(500.0, 500.0, 100.0),
            site: Point3::new(500.0, 500.0, 0.0),
            label: Label::Fungiform,
            footprint: 400.0,
            height: 200.0,
        }];
        let detections = vec![Detection {
            center: Point3::new(510.0, 505.0, 100.0),
            kind: "fungiform".into(),
            score: 2.0,
        }];
        let svg = overlay_svg(&detections, &truths, 2000.0, 2000.0);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("viewBox=\"0 0 2000 2000\""));
        assert_eq!(svg, overlay_svg(&detections, &truths, 2000.0, 2000.0));
    }

    #[test]
    fn map_json_round_trips_with_schema_guard() {
        let map = SurfaceMap {
            schema: MAP_SCHEMA.to_string(),
            detections: vec![Detection {
                center: Point3::new(1.0, 2.0, 3.0),
                kind: "filiform".into(),
                score: 0.7,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        map.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"type\": \"filiform\""));
        let back = SurfaceMap::load(&path).unwrap();
        assert_eq!(back.detections.len(), 1);

        let mut bad: serde_json::Value = serde_json::from_str(&text).unwrap();
        bad["schema"] = "papillae/map-v0".into();
        std::fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(SurfaceMap::load(&path).is_err());
    }
}
