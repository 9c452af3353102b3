//! One-number summaries of persistence diagrams: entropy, short-bar counts
//! and four amplitude families, computed per homology dimension for a
//! 12-value feature block.
//!
//! Every function works on the finite bars of one dimension; infinite bars
//! (the essential H0 class) are ignored. Bars are sorted internally before
//! any accumulation, so permuting the input changes nothing, bit for bit.

use serde::{Deserialize, Serialize};

use crate::num::fcmp;
use crate::persistence::{Bar, PersistenceDiagram};
use crate::Real;

/// Finite bar lengths, ascending.
fn lengths<T: Real>(bars: &[Bar<T>]) -> Vec<T> {
    let mut v: Vec<T> = bars
        .iter()
        .filter(|b| !b.is_infinite())
        .map(|b| b.persistence())
        .collect();
    v.sort_by(|a, b| fcmp(*a, *b));
    v
}

/// Shannon entropy of the normalized bar lengths, in nats;
/// 0 for an empty diagram (logged, since "no structure" and "one bar"
/// then coincide).
pub fn persistent_entropy<T: Real>(bars: &[Bar<T>]) -> T {
    let ls = lengths(bars);
    let total = ls.iter().fold(T::zero(), |a, &b| a + b);
    if ls.is_empty() || !(total > T::zero()) {
        if !bars.is_empty() || !ls.is_empty() {
            log::debug!("persistent entropy of a zero-mass diagram; returning 0");
        }
        return T::zero();
    }
    let mut h = T::zero();
    for &l in &ls {
        let p = l / total;
        if p > T::zero() {
            h -= p * p.ln();
        }
    }
    h
}

/// Number of bars strictly shorter than `threshold`.
pub fn short_bars<T: Real>(bars: &[Bar<T>], threshold: T) -> usize {
    assert!(threshold > T::zero(), "short-bar threshold must be positive");
    bars.iter()
        .filter(|b| !b.is_infinite() && b.persistence() < threshold)
        .count()
}

/// (√2 ⁄ 2) · ‖lengths‖_p — the diagram's p-Wasserstein distance to the
/// empty diagram.
pub fn wasserstein_amplitude<T: Real>(bars: &[Bar<T>], p: T) -> T {
    assert!(p >= T::one(), "wasserstein order must be >= 1");
    let ls = lengths(bars);
    if ls.is_empty() {
        return T::zero();
    }
    let sum = ls.iter().fold(T::zero(), |a, &l| a + l.powf(p));
    half_sqrt2::<T>() * sum.powf(T::one() / p)
}

/// (√2 ⁄ 2) · longest bar.
pub fn bottleneck_amplitude<T: Real>(bars: &[Bar<T>]) -> T {
    let ls = lengths(bars);
    match ls.last() {
        Some(&max) => half_sqrt2::<T>() * max,
        None => T::zero(),
    }
}

fn half_sqrt2<T: Real>() -> T {
    T::two().sqrt() * T::half()
}

/// L2 norm of the first persistence landscape λ₁, where λ₁(t) is the largest
/// tent value min(t − b, d − t)⁺ over all bars, sampled on `grid_points`
/// equispaced points spanning [min birth, max death] and integrated with the
/// rectangle rule. Scales as c^{3/2} under uniform scaling by c (the
/// integrand gains c², the measure another c).
pub fn landscape_amplitude<T: Real>(bars: &[Bar<T>], grid_points: usize) -> T {
    assert!(grid_points >= 2, "landscape grid needs at least 2 points");
    let finite: Vec<&Bar<T>> = bars.iter().filter(|b| !b.is_infinite()).collect();
    if finite.is_empty() {
        return T::zero();
    }
    let lo = finite
        .iter()
        .map(|b| b.birth)
        .fold(T::infinity(), T::min);
    let hi = finite
        .iter()
        .map(|b| b.death)
        .fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return T::zero();
    }
    let dt = (hi - lo) / T::of((grid_points - 1) as f64);
    let mut sum = T::zero();
    for g in 0..grid_points {
        let t = lo + dt * T::of(g as f64);
        let mut best = T::zero();
        for b in &finite {
            let v = (t - b.birth).min(b.death - t);
            if v > best {
                best = v;
            }
        }
        sum += best * best * dt;
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ImageConfig<T> {
    pub bins: usize,
    /// Kernel width as a fraction of the maximum persistence.
    pub sigma_scale: T,
    /// Fractional padding added around the birth/persistence extents.
    pub padding: T,
}

impl<T: Real> Default for ImageConfig<T> {
    fn default() -> Self {
        Self {
            bins: 100,
            sigma_scale: T::of(0.1),
            padding: T::of(0.05),
        }
    }
}

/// L2 norm of the persistence image: bars live at (birth, persistence),
/// each contributes an *unnormalized* Gaussian bump weighted by its
/// persistence, rasterized on a bins×bins grid over the padded extents.
/// Unnormalized keeps the raster linear in the bar multiset, so duplicating
/// every bar doubles the amplitude exactly.
pub fn image_amplitude<T: Real>(bars: &[Bar<T>], cfg: &ImageConfig<T>) -> T {
    assert!(cfg.bins >= 1, "image raster needs at least 1 bin");
    let mut raw: Vec<(T, T)> = bars
        .iter()
        .filter(|b| !b.is_infinite())
        .map(|b| (b.birth, b.persistence()))
        .collect();
    raw.sort_by(|a, b| fcmp(a.0, b.0).then(fcmp(a.1, b.1)));
    if raw.is_empty() {
        return T::zero();
    }
    // Collapse repeated bars into a multiplicity so that duplicating the
    // diagram scales every accumulated term — and hence the norm — exactly.
    let mut pts: Vec<(T, T, usize)> = Vec::with_capacity(raw.len());
    for (b, p) in raw {
        match pts.last_mut() {
            Some(last) if last.0 == b && last.1 == p => last.2 += 1,
            _ => pts.push((b, p, 1)),
        }
    }
    let max_pers = pts.iter().map(|p| p.1).fold(T::zero(), T::max);
    let sigma = cfg.sigma_scale * max_pers;
    if !(sigma > T::zero()) {
        return T::zero();
    }
    let axis = |vals: Vec<T>| -> (T, T) {
        let lo = vals.iter().copied().fold(T::infinity(), T::min);
        let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let span = hi - lo;
        let pad = if span > T::zero() {
            cfg.padding * span
        } else {
            cfg.padding * max_pers
        };
        (lo - pad, hi + pad)
    };
    let (bx0, bx1) = axis(pts.iter().map(|p| p.0).collect());
    let (py0, py1) = axis(pts.iter().map(|p| p.1).collect());
    let centers = |lo: T, hi: T| -> Vec<T> {
        let step = (hi - lo) / T::of(cfg.bins as f64);
        (0..cfg.bins)
            .map(|i| lo + step * (T::of(i as f64) + T::half()))
            .collect()
    };
    let xs = centers(bx0, bx1);
    let ys = centers(py0, py1);

    let inv2s2 = T::one() / (T::two() * sigma * sigma);
    let mut raster = vec![T::zero(); cfg.bins * cfg.bins];
    let mut gx = vec![T::zero(); cfg.bins];
    let mut gy = vec![T::zero(); cfg.bins];
    for &(b, p, count) in &pts {
        let weight = T::of(count as f64) * p;
        for (g, &x) in gx.iter_mut().zip(&xs) {
            let d = x - b;
            *g = (-(d * d) * inv2s2).exp();
        }
        for (g, &y) in gy.iter_mut().zip(&ys) {
            let d = y - p;
            *g = (-(d * d) * inv2s2).exp();
        }
        for (row, &vy) in raster.chunks_mut(cfg.bins).zip(&gy) {
            let w = weight * vy;
            for (cell, &vx) in row.iter_mut().zip(&gx) {
                *cell += w * vx;
            }
        }
    }
    raster
        .iter()
        .fold(T::zero(), |a, &v| a + v * v)
        .sqrt()
}

/// The 12-feature topological block for one diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoFeatures<T> {
    pub entropy_0: T,
    pub entropy_1: T,
    pub short_bars_0: usize,
    pub short_bars_1: usize,
    pub amp_wasserstein_0: T,
    pub amp_wasserstein_1: T,
    pub amp_bottleneck_0: T,
    pub amp_bottleneck_1: T,
    pub amp_landscape_0: T,
    pub amp_landscape_1: T,
    pub amp_image_0: T,
    pub amp_image_1: T,
}

impl<T: Real> TopoFeatures<T> {
    pub const NAMES: [&'static str; 12] = [
        "entropy_0",
        "entropy_1",
        "short_bars_0",
        "short_bars_1",
        "amp_wasserstein_0",
        "amp_wasserstein_1",
        "amp_bottleneck_0",
        "amp_bottleneck_1",
        "amp_landscape_0",
        "amp_landscape_1",
        "amp_image_0",
        "amp_image_1",
    ];

    pub fn to_array(&self) -> [T; 12] {
        [
            self.entropy_0,
            self.entropy_1,
            T::of(self.short_bars_0 as f64),
            T::of(self.short_bars_1 as f64),
            self.amp_wasserstein_0,
            self.amp_wasserstein_1,
            self.amp_bottleneck_0,
            self.amp_bottleneck_1,
            self.amp_landscape_0,
            self.amp_landscape_1,
            self.amp_image_0,
            self.amp_image_1,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct VectorizeConfig<T> {
    pub short_bar_threshold_h0: T,
    pub short_bar_threshold_h1: T,
    pub wasserstein_p: T,
    pub landscape_grid: usize,
    pub image: ImageConfig<T>,
}

impl<T: Real> Default for VectorizeConfig<T> {
    fn default() -> Self {
        Self {
            short_bar_threshold_h0: T::of(10.0),
            short_bar_threshold_h1: T::of(10.0),
            wasserstein_p: T::two(),
            landscape_grid: 100,
            image: ImageConfig::default(),
        }
    }
}

pub fn topo_features<T: Real>(
    diag: &PersistenceDiagram<T>,
    cfg: &VectorizeConfig<T>,
) -> TopoFeatures<T> {
    let (d0, d1) = (&diag.dim0[..], &diag.dim1[..]);
    TopoFeatures {
        entropy_0: persistent_entropy(d0),
        entropy_1: persistent_entropy(d1),
        short_bars_0: short_bars(d0, cfg.short_bar_threshold_h0),
        short_bars_1: short_bars(d1, cfg.short_bar_threshold_h1),
        amp_wasserstein_0: wasserstein_amplitude(d0, cfg.wasserstein_p),
        amp_wasserstein_1: wasserstein_amplitude(d1, cfg.wasserstein_p),
        amp_bottleneck_0: bottleneck_amplitude(d0),
        amp_bottleneck_1: bottleneck_amplitude(d1),
        amp_landscape_0: landscape_amplitude(d0, cfg.landscape_grid),
        amp_landscape_1: landscape_amplitude(d1, cfg.landscape_grid),
        amp_image_0: image_amplitude(d0, &cfg.image),
        amp_image_1: image_amplitude(d1, &cfg.image),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bars(v: &[(f64, f64)]) -> Vec<Bar<f64>> {
        v.iter().map(|&(b, d)| Bar::finite(b, d)).collect()
    }

    #[test]
    fn entropy_of_two_equal_bars_is_ln2() {
        let h = persistent_entropy(&bars(&[(0.0, 1.0), (3.0, 4.0)]));
        assert_eq!(h, std::f64::consts::LN_2);
    }

    #[test]
    fn entropy_of_one_bar_is_zero() {
        assert_eq!(persistent_entropy(&bars(&[(0.0, 7.0)])), 0.0);
    }

    #[test]
    fn entropy_quarter_three_quarter() {
        let h = persistent_entropy(&bars(&[(0.0, 1.0), (0.0, 3.0)]));
        let want = -(0.25f64.ln() * 0.25 + 0.75f64.ln() * 0.75);
        assert!((h - want).abs() < 1e-15);
        assert!((h - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn entropy_is_exactly_scale_invariant() {
        let base = bars(&[(0.0, 1.0), (0.0, 2.0), (2.0, 5.0)]);
        let h = persistent_entropy(&base);
        for c in [0.5, 3.0, 100.0] {
            let scaled: Vec<Bar<f64>> = base
                .iter()
                .map(|b| Bar::finite(b.birth * c, b.death * c))
                .collect();
            assert_eq!(persistent_entropy(&scaled), h, "c = {c}");
        }
    }

    #[test]
    fn entropy_ignores_infinite_bars_and_handles_empty() {
        assert_eq!(persistent_entropy::<f64>(&[]), 0.0);
        let mut v = bars(&[(0.0, 1.0), (2.0, 3.0)]);
        v.push(Bar::infinite(0.0));
        assert_eq!(persistent_entropy(&v), std::f64::consts::LN_2);
    }

    #[test]
    fn short_bar_counting() {
        let v = bars(&[(0.0, 2.0), (1.0, 6.0), (0.0, 12.0)]);
        assert_eq!(short_bars(&v, 10.0), 2);
        assert_eq!(short_bars(&bars(&[]), 10.0), 0);
        assert_eq!(short_bars(&v, 2.0), 0);
        // Monotone in the threshold.
        assert!(short_bars(&v, 5.0) <= short_bars(&v, 10.0));
        assert_eq!(short_bars(&v, 100.0), 3);
    }

    #[test]
    fn wasserstein_examples() {
        let a = wasserstein_amplitude(&bars(&[(0.0, 2.0)]), 2.0);
        assert!((a - 2f64.sqrt()).abs() < 1e-15);
        let b = wasserstein_amplitude(&bars(&[(0.0, 1.0), (5.0, 6.0)]), 2.0);
        assert!((b - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein_amplitude(&bars(&[]), 2.0), 0.0);
    }

    #[test]
    fn bottleneck_examples() {
        let a = bottleneck_amplitude(&bars(&[(0.0, 1.0), (1.0, 5.0)]));
        assert!((a - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(bottleneck_amplitude(&bars(&[])), 0.0);
        // Exact linearity under power-of-two scaling.
        let v = bars(&[(0.5, 3.5), (1.0, 2.0)]);
        let s: Vec<Bar<f64>> = v
            .iter()
            .map(|b| Bar::finite(b.birth * 4.0, b.death * 4.0))
            .collect();
        assert_eq!(bottleneck_amplitude(&s), 4.0 * bottleneck_amplitude(&v));
    }

    #[test]
    fn landscape_single_bar_matches_analytic() {
        // ∫ tent(0,2)² dt = 2/3.
        let a = landscape_amplitude(&bars(&[(0.0, 2.0)]), 100);
        let want = (2.0f64 / 3.0).sqrt();
        assert!((a - want).abs() / want < 0.02, "got {a}, want {want}");
    }

    #[test]
    fn landscape_two_disjoint_bars_matches_analytic() {
        let a = landscape_amplitude(&bars(&[(0.0, 2.0), (4.0, 6.0)]), 100);
        let want = (4.0f64 / 3.0).sqrt();
        assert!((a - want).abs() / want < 0.02, "got {a}, want {want}");
    }

    #[test]
    fn landscape_scales_as_c_three_halves() {
        let v = bars(&[(0.0, 2.0), (1.0, 4.0)]);
        let c = 4.0;
        let s: Vec<Bar<f64>> = v
            .iter()
            .map(|b| Bar::finite(b.birth * c, b.death * c))
            .collect();
        let r = landscape_amplitude(&s, 100) / landscape_amplitude(&v, 100);
        assert!((r - c.powf(1.5)).abs() < 1e-9, "ratio {r}");
    }

    #[test]
    fn landscape_empty_is_zero() {
        assert_eq!(landscape_amplitude(&bars(&[]), 100), 0.0);
    }

    #[test]
    fn image_is_monotone_in_persistence() {
        let cfg = ImageConfig::default();
        let lo = image_amplitude(&bars(&[(0.0, 2.0)]), &cfg);
        let hi = image_amplitude(&bars(&[(0.0, 4.0)]), &cfg);
        assert!(hi > lo, "expected monotone: {hi} vs {lo}");
    }

    #[test]
    fn image_doubles_exactly_when_bars_are_duplicated() {
        let cfg = ImageConfig::default();
        let v = bars(&[(0.0, 3.0), (1.0, 2.0), (0.5, 4.5)]);
        let mut doubled = v.clone();
        doubled.extend_from_slice(&v);
        let a = image_amplitude(&v, &cfg);
        let b = image_amplitude(&doubled, &cfg);
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn image_empty_is_zero() {
        assert_eq!(image_amplitude(&bars(&[]), &ImageConfig::default()), 0.0);
    }

    #[test]
    fn amplitudes_are_permutation_invariant_bitwise() {
        let v = bars(&[(0.0, 1.0), (0.2, 3.1), (1.0, 1.7), (0.4, 2.9)]);
        let mut p = v.clone();
        p.reverse();
        p.swap(1, 2);
        assert_eq!(
            wasserstein_amplitude(&v, 2.0),
            wasserstein_amplitude(&p, 2.0)
        );
        assert_eq!(persistent_entropy(&v), persistent_entropy(&p));
        assert_eq!(
            image_amplitude(&v, &ImageConfig::default()),
            image_amplitude(&p, &ImageConfig::default())
        );
        assert_eq!(landscape_amplitude(&v, 50), landscape_amplitude(&p, 50));
    }

    #[test]
    fn unit_square_summary_matches_hand_arithmetic() {
        // H0: three bars of length 1 (plus the dropped infinite one);
        // H1: the single loop (1, √2).
        let diag = PersistenceDiagram {
            dim0: vec![
                Bar::finite(0.0, 1.0),
                Bar::finite(0.0, 1.0),
                Bar::finite(0.0, 1.0),
                Bar::infinite(0.0),
            ],
            dim1: vec![Bar::finite(1.0, 2f64.sqrt())],
            t_max: 2.0,
        };
        let f = topo_features(&diag, &VectorizeConfig::default());
        assert!((f.entropy_0 - 3f64.ln()).abs() < 1e-15);
        assert_eq!(f.entropy_1, 0.0);
        assert_eq!((f.short_bars_0, f.short_bars_1), (3, 1));
        assert!((f.amp_wasserstein_0 - (2f64.sqrt() / 2.0) * 3f64.sqrt()).abs() < 1e-15);
        let l1 = 2f64.sqrt() - 1.0;
        assert!((f.amp_wasserstein_1 - (2f64.sqrt() / 2.0) * l1).abs() < 1e-15);
        assert!((f.amp_bottleneck_0 - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((f.amp_bottleneck_1 - (2f64.sqrt() / 2.0) * l1).abs() < 1e-15);
        let want_l0 = (1.0f64 / 12.0).sqrt();
        assert!((f.amp_landscape_0 - want_l0).abs() / want_l0 < 0.02);
        let want_l1 = (l1.powi(3) / 12.0).sqrt();
        assert!((f.amp_landscape_1 - want_l1).abs() / want_l1 < 0.02);
        assert!(f.amp_image_0 > 0.0 && f.amp_image_1 > 0.0);
        // Deterministic end to end.
        let g = topo_features(&diag, &VectorizeConfig::default());
        assert_eq!(f, g);
    }

    #[test]
    fn single_point_diagram_gives_all_zeros() {
        let diag = PersistenceDiagram::<f64> {
            dim0: vec![Bar::infinite(0.0)],
            dim1: vec![],
            t_max: 0.0,
        };
        let f = topo_features(&diag, &VectorizeConfig::default());
        assert_eq!(f.to_array(), [0.0; 12]);
    }
}
