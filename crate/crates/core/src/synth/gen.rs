//! Papillae-like surface generators.
//!
//! The shapes are parametric inventions pinned to published scale
//! numbers: a smooth super-ellipse dome for the fungiform class, a
//! central cone ringed by tilted spikes for the filiform crown, and
//! band-limited sinusoid noise for featureless ground. Everything is a
//! pure function of (config, seed), so corpora are reproducible.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Point3;
use crate::mesh::TriangleMesh;
use crate::num::{fcmp, Real};
use crate::rng;
use crate::segment::{self, ExtractionConfig, Label, Segment};
use crate::synth::shapes::{disk_heightfield, rect_heightfield};
use crate::{Error, Result};

/// Scale and randomness knobs for the generators. Lengths in
/// micrometres; density in placements per cm².
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SynthConfig<T> {
    pub fungiform_diameter: T,
    pub fungiform_height: T,
    pub filiform_diameter: T,
    pub filiform_height: T,
    pub filiform_density: T,
    pub spike_count: usize,
    pub noise_amplitude: T,
    pub grid_spacing: T,
    pub seed: u64,
}

impl<T: Real> Default for SynthConfig<T> {
    fn default() -> Self {
        Self {
            fungiform_diameter: T::of(878.0),
            fungiform_height: T::of(200.0),
            filiform_diameter: T::of(355.0),
            filiform_height: T::of(150.0),
            filiform_density: T::of(150.0),
            spike_count: 6,
            noise_amplitude: T::of(8.0),
            grid_spacing: T::of(15.0),
            seed: 0,
        }
    }
}

/// Patch radius used by the single-papilla generators: covers the
/// default extraction reach (cut radius + delta) with margin to spare.
const PATCH_RADIUS: f64 = 650.0;

/// Fungiform apexes sit ~15 per cm² for every 150 filiform, mirroring
/// the roughly 14:40 mix of the paper's demo sheet.
const FUNGIFORM_DENSITY_RATIO: f64 = 0.35;

/// Band-limited noise: a sum of `modes` random-direction sinusoids whose
/// amplitudes add up to at most `amplitude`. Zero amplitude gives an
/// exactly-zero field.
fn sinusoid_noise<T: Real>(seed: u64, amplitude: T, modes: usize) -> impl Fn(T, T) -> T {
    let mut rng = rng::rng_from(seed);
    let tau = std::f64::consts::TAU;
    let mut comps = Vec::with_capacity(modes);
    for _ in 0..modes {
        let wavelength: f64 = rng.gen_range(150.0..600.0);
        let dir: f64 = rng.gen_range(0.0..tau);
        let phase: f64 = rng.gen_range(0.0..tau);
        let k = tau / wavelength;
        comps.push((
            T::of(k * dir.cos()),
            T::of(k * dir.sin()),
            T::of(phase),
        ));
    }
    let per = amplitude / T::of(modes as f64);
    move |x: T, y: T| {
        let mut z = T::zero();
        for &(kx, ky, phase) in &comps {
            z += per * (kx * x + ky * y + phase).sin();
        }
        z
    }
}

/// Spherical-cap dome profile: height exactly `height` at the centre,
/// zero at footprint radius `a` and beyond.
fn dome_profile<T: Real>(height: T, a: T) -> impl Fn(T, T) -> T {
    let r_c = (a * a + height * height) / (T::two() * height);
    let drop = r_c - height;
    move |x: T, y: T| {
        let rho2 = x * x + y * y;
        if rho2 == T::zero() {
            height
        } else if rho2 >= a * a {
            T::zero()
        } else {
            (r_c * r_c - rho2).sqrt() - drop
        }
    }
}

/// One tilted spike: a cone whose tip sits at `tip` (height `h`) and
/// whose base disk of radius `w` is centred at `base` on the ground.
struct Spike<T> {
    base: (T, T),
    tip: (T, T),
    h: T,
    w: T,
}

impl<T: Real> Spike<T> {
    fn eval(&self, x: T, y: T) -> T {
        let ux = self.tip.0 - self.base.0;
        let uy = self.tip.1 - self.base.1;
        let len2 = ux * ux + uy * uy;
        let t = if len2 > T::zero() {
            (((x - self.base.0) * ux + (y - self.base.1) * uy) / len2)
                .max(T::zero())
                .min(T::one())
        } else {
            T::one()
        };
        let ax = self.base.0 + t * ux;
        let ay = self.base.1 + t * uy;
        let d = ((x - ax) * (x - ax) + (y - ay) * (y - ay)).sqrt();
        let radius = self.w * (T::one() - T::of(0.9) * t);
        let profile = T::one() - d / radius;
        if profile > T::zero() {
            self.h * t * profile
        } else {
            T::zero()
        }
    }
}

/// Crown heightfield: central cone of the full class height surrounded
/// by `spike_count` outward-tilted spikes at three quarters of it.
fn crown_profile<T: Real>(
    height: T,
    radius: T,
    spike_count: usize,
    seed: u64,
) -> impl Fn(T, T) -> T {
    let mut rng = rng::rng_from(seed);
    let tau = std::f64::consts::TAU;
    let rot: f64 = rng.gen_range(0.0..tau);
    let mut spikes = Vec::with_capacity(spike_count);
    for k in 0..spike_count {
        let theta = rot + tau * k as f64 / spike_count as f64 + rng.gen_range(-0.15..0.15);
        let h_jitter: f64 = rng.gen_range(0.9..1.1);
        let (sin, cos) = (T::of(theta.sin()), T::of(theta.cos()));
        spikes.push(Spike {
            base: (radius * T::of(0.35) * cos, radius * T::of(0.35) * sin),
            tip: (radius * T::of(0.8) * cos, radius * T::of(0.8) * sin),
            h: height * T::of(0.75 * h_jitter),
            w: radius * T::of(0.22),
        });
    }
    let cone_radius = radius * T::of(0.4);
    move |x: T, y: T| {
        let rho = (x * x + y * y).sqrt();
        let mut z = (height * (T::one() - rho / cone_radius)).max(T::zero());
        for s in &spikes {
            z = z.max(s.eval(x, y));
        }
        z
    }
}

fn patch<T: Real>(
    cfg: &SynthConfig<T>,
    shape: impl Fn(T, T) -> T,
    noise_seed: u64,
    amp: T,
    radius: T,
) -> TriangleMesh<T> {
    let noise = sinusoid_noise(noise_seed, amp, 8);
    disk_heightfield(radius, cfg.grid_spacing, |x, y| shape(x, y) + noise(x, y))
}

fn fungiform_patch<T: Real>(cfg: &SynthConfig<T>, seed: u64, radius: T) -> TriangleMesh<T> {
    let dome = dome_profile(cfg.fungiform_height, cfg.fungiform_diameter * T::half());
    patch(cfg, dome, rng::derive(seed, "fungiform-noise"), cfg.noise_amplitude, radius)
}

fn filiform_patch<T: Real>(cfg: &SynthConfig<T>, seed: u64, radius: T) -> TriangleMesh<T> {
    let crown = crown_profile(
        cfg.filiform_height,
        cfg.filiform_diameter * T::half(),
        cfg.spike_count.max(3),
        rng::derive(seed, "crown-shape"),
    );
    patch(cfg, crown, rng::derive(seed, "filiform-noise"), cfg.noise_amplitude, radius)
}

fn none_patch<T: Real>(cfg: &SynthConfig<T>, seed: u64, radius: T) -> TriangleMesh<T> {
    let amp = (cfg.noise_amplitude * T::of(3.0)).min(cfg.filiform_height * T::of(0.22));
    patch(cfg, |_, _| T::zero(), rng::derive(seed, "none-noise"), amp, radius)
}

/// Dome-class patch: a fungiform-scale spherical cap on a flat skirt,
/// with seeded surface noise. With zero noise the apex height is exactly
/// `cfg.fungiform_height`.
pub fn gen_fungiform<T: Real>(cfg: &SynthConfig<T>, seed: u64) -> TriangleMesh<T> {
    fungiform_patch(cfg, seed, T::of(PATCH_RADIUS))
}

/// Crown-class patch: central cone plus tilted spikes on a flat skirt.
pub fn gen_filiform<T: Real>(cfg: &SynthConfig<T>, seed: u64) -> TriangleMesh<T> {
    filiform_patch(cfg, seed, T::of(PATCH_RADIUS))
}

/// Featureless ground: undulating noise bounded well below the filiform
/// height (nothing taller than a quarter of it), exactly flat at zero
/// noise amplitude.
pub fn gen_none<T: Real>(cfg: &SynthConfig<T>, seed: u64) -> TriangleMesh<T> {
    none_patch(cfg, seed, T::of(PATCH_RADIUS))
}

/// Highest vertex of a mesh (lowest index on exact ties).
pub fn apex_vertex<T: Real>(mesh: &TriangleMesh<T>) -> Point3<T> {
    let mut best = mesh.vertices()[0];
    for &v in &mesh.vertices()[1..] {
        if fcmp(v.z, best.z).is_gt() {
            best = v;
        }
    }
    best
}

/// Per-segment generator parameters, embedded in the corpus manifest so
/// every segment can be traced back to the exact shape that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentParams {
    pub class: Label,
    pub diameter: f64,
    pub height: f64,
    pub noise_amplitude: f64,
    pub patch_radius: f64,
    pub patch_seed: u64,
}

/// A labeled synthetic segment plus its ground truth.
#[derive(Debug, Clone)]
pub struct CorpusEntry<T> {
    pub id: String,
    pub segment: Segment<T>,
    /// True apex of the generated patch (before cutting).
    pub true_center: Point3<T>,
    pub params: SegmentParams,
}

/// Uniform multiplicative jitter in [1-scale, 1+scale], keyed by tag.
fn jitter(master: u64, tag: &str, scale: f64) -> f64 {
    let mut r = rng::rng_from(rng::derive(master, tag));
    1.0 + scale * r.gen_range(-1.0..1.0)
}

fn participant_attrs(seed: u64, p: usize) -> (String, BTreeMap<String, String>) {
    let id = format!("p{p:02}");
    let mut attrs = BTreeMap::new();
    let gender = if rng::derive(seed, &format!("gender-{p}")) & 1 == 0 {
        "f"
    } else {
        "m"
    };
    let age = if rng::derive(seed, &format!("age-{p}")) & 1 == 0 {
        "young"
    } else {
        "old"
    };
    attrs.insert("gender".into(), gender.into());
    attrs.insert("age_group".into(), age.into());
    (id, attrs)
}

/// Generate `n_per_class` labeled segments for each of the three classes
/// (fungiform, filiform, none), spread round-robin over `participants`
/// synthetic participants.
///
/// Each participant carries ±10% jitter on diameters and heights, and
/// every segment another ±20% on height, so classes overlap the way
/// biological replicates do. Segments are produced by running the real
/// extraction pipeline on each generated patch.
pub fn gen_corpus<T: Real>(
    cfg: &SynthConfig<T>,
    n_per_class: usize,
    participants: usize,
    seed: u64,
) -> Result<Vec<CorpusEntry<T>>> {
    if n_per_class == 0 || participants == 0 {
        return Err(Error::invalid("corpus needs n_per_class and participants >= 1"));
    }
    let classes = [Label::Fungiform, Label::Filiform, Label::None];
    let specs: Vec<(Label, usize)> = classes
        .iter()
        .flat_map(|&c| (0..n_per_class).map(move |i| (c, i)))
        .collect();

    specs
        .par_iter()
        .map(|&(class, i)| gen_corpus_entry(cfg, class, i, participants, seed))
        .collect()
}

fn gen_corpus_entry<T: Real>(
    cfg: &SynthConfig<T>,
    class: Label,
    i: usize,
    participants: usize,
    seed: u64,
) -> Result<CorpusEntry<T>> {
    let p = i % participants;
    let (participant, group_attrs) = participant_attrs(seed, p);
    let patch_seed = rng::derive(seed, &format!("patch-{class}-{i}"));

    // Participant-level scale identity plus per-segment height spread.
    let pj = |tag: &str| jitter(seed, &format!("{tag}-{p}"), 0.10);
    let hj = jitter(seed, &format!("height-{class}-{i}"), 0.20);

    let mut local = cfg.clone();
    local.fungiform_diameter = cfg.fungiform_diameter * T::of(pj("fungiform-diameter"));
    local.filiform_diameter = cfg.filiform_diameter * T::of(pj("filiform-diameter"));
    local.fungiform_height = cfg.fungiform_height * T::of(pj("fungiform-height") * hj);
    local.filiform_height = cfg.filiform_height * T::of(pj("filiform-height") * hj);

    // Crops are sized per specimen the way hand-cut scan patches are: a
    // dome needs its whole footprint plus skirt, while crown and bare
    // crops come as tight as the segmenter liked.
    let mut cr = rng::rng_from(rng::derive(seed, &format!("crop-{class}-{i}")));
    let crop = match class {
        Label::Fungiform => cr.gen_range(600.0..PATCH_RADIUS),
        _ => cr.gen_range(320.0..PATCH_RADIUS),
    };

    let (mesh, diameter, height) = match class {
        Label::Fungiform => (
            fungiform_patch(&local, patch_seed, T::of(crop)),
            local.fungiform_diameter,
            local.fungiform_height,
        ),
        Label::Filiform => (
            filiform_patch(&local, patch_seed, T::of(crop)),
            local.filiform_diameter,
            local.filiform_height,
        ),
        _ => (none_patch(&local, patch_seed, T::of(crop)), T::zero(), T::zero()),
    };
    let true_center = apex_vertex(&mesh);

    // Seed the extraction off-centre to exercise tip snapping.
    let mut r = rng::rng_from(rng::derive(seed, &format!("seed-point-{class}-{i}")));
    let dx = T::of(r.gen_range(-120.0..120.0));
    let dy = T::of(r.gen_range(-120.0..120.0));
    let seed_point = Point3::new(true_center.x + dx, true_center.y + dy, true_center.z);
    let ex = ExtractionConfig {
        seed: rng::derive(seed, &format!("extract-{class}-{i}")),
        ..ExtractionConfig::default()
    };
    let mut segment = segment::extract_segment(&mesh, seed_point, &ex)?;
    segment.label = class;
    segment.participant = participant.clone();
    segment.group_attrs = group_attrs;

    Ok(CorpusEntry {
        id: format!("{class}-{participant}-{i:04}"),
        segment,
        true_center,
        params: SegmentParams {
            class,
            diameter: diameter.f64(),
            height: height.f64(),
            noise_amplitude: cfg.noise_amplitude.f64(),
            patch_radius: crop,
            patch_seed,
        },
    })
}

/// Write every segment (PLY + JSON sidecar) and a `manifest.csv` of
/// ground truth into `dir`.
pub fn save_corpus<T: Real>(entries: &[CorpusEntry<T>], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record([
        "id",
        "class",
        "participant",
        "true_x",
        "true_y",
        "true_z",
        "parameters",
    ])?;
    for e in entries {
        segment::save_segment(&e.segment, dir, &e.id)?;
        manifest.write_record(&[
            e.id.clone(),
            e.params.class.to_string(),
            e.segment.participant.clone(),
            format!("{}", e.true_center.x),
            format!("{}", e.true_center.y),
            format!("{}", e.true_center.z),
            serde_json::to_string(&e.params)?,
        ])?;
    }
    manifest.flush()?;
    Ok(())
}

/// Ground-truth record for one papilla on a generated sheet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement<T> {
    /// Apex vertex of the instance on the final (noisy) sheet.
    pub center: Point3<T>,
    /// Intended centre on the ground plane (z = 0); separation guarantees
    /// hold between sites, while `center` rides the surface noise.
    pub site: Point3<T>,
    pub label: Label,
    /// Footprint radius claimed on the ground plane.
    pub footprint: T,
    pub height: T,
}

pub const SHEET_TRUTH_SCHEMA: &str = "papillae/placements-v1";

/// On-disk ground truth for a generated sheet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SheetTruth<T> {
    pub schema: String,
    pub placements: Vec<Placement<T>>,
}

impl<T: Real + Serialize + serde::de::DeserializeOwned> SheetTruth<T> {
    pub fn new(placements: Vec<Placement<T>>) -> Self {
        Self {
            schema: SHEET_TRUTH_SCHEMA.to_string(),
            placements,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let truth: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if truth.schema != SHEET_TRUTH_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported placement schema `{}` (this build reads `{SHEET_TRUTH_SCHEMA}`)",
                truth.schema
            )));
        }
        Ok(truth)
    }
}

struct Site<T> {
    x: T,
    y: T,
    label: Label,
    footprint: T,
    height: T,
    shape_seed: u64,
}

/// Populate a `width x depth` µm sheet with non-overlapping papillae at
/// the configured filiform density (fungiform ride along at
/// [`FUNGIFORM_DENSITY_RATIO`] of it) and return the mesh plus true
/// apex placements. Errors when the requested density cannot fit.
pub fn gen_sheet<T: Real>(
    cfg: &SynthConfig<T>,
    width: T,
    depth: T,
    seed: u64,
) -> Result<(TriangleMesh<T>, Vec<Placement<T>>)> {
    let area_cm2 = (width * depth).f64() / 1e8;
    let fil_target = (cfg.filiform_density.f64() * area_cm2).round() as usize;
    let fun_target =
        (cfg.filiform_density.f64() * FUNGIFORM_DENSITY_RATIO * area_cm2).round() as usize;
    let fun_radius = cfg.fungiform_diameter * T::half();
    let fil_radius = cfg.filiform_diameter * T::half();
    if fun_target > 0 && (width < cfg.fungiform_diameter || depth < cfg.fungiform_diameter) {
        return Err(Error::invalid("sheet smaller than one fungiform footprint"));
    }

    // Dart-throwing with hard separation (sum of footprints); large
    // instances first so the small ones can fill the gaps.
    let mut rng = rng::rng_from(rng::derive(seed, "sheet-placement"));
    let mut sites: Vec<Site<T>> = Vec::new();
    for (label, target, radius, height) in [
        (Label::Fungiform, fun_target, fun_radius, cfg.fungiform_height),
        (Label::Filiform, fil_target, fil_radius, cfg.filiform_height),
    ] {
        let mut placed = 0;
        let mut attempts = 0usize;
        let max_attempts = 4000 * target.max(1);
        while placed < target && attempts < max_attempts {
            attempts += 1;
            let x = T::of(rng.gen_range(radius.f64()..(width.f64() - radius.f64())));
            let y = T::of(rng.gen_range(radius.f64()..(depth.f64() - radius.f64())));
            let clear = sites.iter().all(|s| {
                let dx = s.x - x;
                let dy = s.y - y;
                let min = s.footprint + radius;
                dx * dx + dy * dy >= min * min
            });
            if clear {
                let hj = T::of(jitter(seed, &format!("sheet-h-{label}-{placed}"), 0.10));
                sites.push(Site {
                    x,
                    y,
                    label,
                    footprint: radius,
                    height: height * hj,
                    shape_seed: rng::derive(seed, &format!("sheet-shape-{label}-{placed}")),
                });
                placed += 1;
            }
        }
        let slack = (target as f64 * 0.07).round().max(2.0) as usize;
        if placed + slack < target {
            return Err(Error::invalid(format!(
                "sheet too small for requested density: placed {placed} of {target} {label}"
            )));
        }
    }

    // Bucket sites on a coarse grid so each lattice vertex only looks at
    // nearby instances.
    let cell = cfg.fungiform_diameter.f64().max(1.0);
    let bucket_of = |x: f64, y: f64| ((x / cell).floor() as i64, (y / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, s) in sites.iter().enumerate() {
        buckets.entry(bucket_of(s.x.f64(), s.y.f64())).or_default().push(k);
    }

    let shapes: Vec<Box<dyn Fn(T, T) -> T + Sync + Send>> = sites
        .iter()
        .map(|s| -> Box<dyn Fn(T, T) -> T + Sync + Send> {
            match s.label {
                Label::Fungiform => Box::new(dome_profile(s.height, s.footprint)),
                _ => Box::new(crown_profile(
                    s.height,
                    s.footprint,
                    cfg.spike_count.max(3),
                    s.shape_seed,
                )),
            }
        })
        .collect();

    let noise = sinusoid_noise(
        rng::derive(seed, "sheet-noise"),
        cfg.noise_amplitude.min(cfg.filiform_height * T::of(0.05)),
        8,
    );
    let field = |x: T, y: T| {
        let mut z = noise(x, y);
        let (bx, by) = bucket_of(x.f64(), y.f64());
        for i in bx - 1..=bx + 1 {
            for j in by - 1..=by + 1 {
                if let Some(ids) = buckets.get(&(i, j)) {
                    for &k in ids {
                        let s = &sites[k];
                        z = z.max(shapes[k](x - s.x, y - s.y) + noise(x, y));
                    }
                }
            }
        }
        z
    };
    let mesh = rect_heightfield(width, depth, cfg.grid_spacing, field);

    // True apex per site: highest vertex within its footprint.
    let mut best: Vec<Option<Point3<T>>> = vec![None; sites.len()];
    for &v in mesh.vertices() {
        let (bx, by) = bucket_of(v.x.f64(), v.y.f64());
        for i in bx - 1..=bx + 1 {
            for j in by - 1..=by + 1 {
                if let Some(ids) = buckets.get(&(i, j)) {
                    for &k in ids {
                        let s = &sites[k];
                        let dx = v.x - s.x;
                        let dy = v.y - s.y;
                        if dx * dx + dy * dy <= s.footprint * s.footprint {
                            if best[k].map_or(true, |b| fcmp(v.z, b.z).is_gt()) {
                                best[k] = Some(v);
                            }
                        }
                    }
                }
            }
        }
    }
    let placements = sites
        .iter()
        .zip(best)
        .map(|(s, b)| Placement {
            center: b.expect("every footprint contains lattice vertices"),
            site: Point3::new(s.x, s.y, T::zero()),
            label: s.label,
            footprint: s.footprint,
            height: s.height,
        })
        .collect();
    Ok((mesh, placements))
}
