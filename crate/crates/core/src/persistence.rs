//! Vietoris–Rips persistent homology in dimensions 0 and 1 over Z/2.
//!
//! H0 comes from a Kruskal pass over the sorted edge list: finite deaths are
//! exactly the spanning-forest edge lengths. H1 uses persistent cohomology
//! (the anti-transposed reduction): columns are the non-forest edges taken in
//! decreasing `(length, i, j)` order, forest edges are skipped outright
//! (clearing), and a column's pivot is its minimal cofacet triangle in
//! `(diameter, lexicographic)` order. Triangles are never materialized —
//! cofacets are enumerated on demand by intersecting per-vertex neighbor
//! bitsets — and most pivots are claimed straight from the raw coboundary,
//! in which case only the generating edge is remembered and the column is
//! rebuilt lazily if another column ever collides with it.
//!
//! Two further facts keep n = 1000 cheap. A Rips complex is contractible at
//! and beyond its enclosing radius R = min_i max_j d(i,j) (every vertex is
//! then joined to some hub), so H1 can be truncated at min(t_max, R) without
//! changing any bar. And a triangle's filtration value is its longest side,
//! so any cofacet found while both endpoints' neighborhoods are restricted
//! to the threshold is automatically inside the complex.
//!
//! A single reduction is inherently sequential (columns depend on earlier
//! pivots); parallelism belongs one level up, across diagrams.

pub mod naive;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::geom::Point3;
use crate::mesh::PointCloud;
use crate::num::fcmp;
use crate::{Error, Real, Result};

/// One persistence bar. `death` is `+inf` for classes that never die within
/// the filtration; `censored` marks H1 bars whose true death lies beyond the
/// threshold and was truncated to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar<T> {
    pub birth: T,
    pub death: T,
    pub censored: bool,
}

impl<T: Real> Bar<T> {
    pub fn finite(birth: T, death: T) -> Self {
        Self {
            birth,
            death,
            censored: false,
        }
    }

    pub fn infinite(birth: T) -> Self {
        Self {
            birth,
            death: T::infinity(),
            censored: false,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.death == T::infinity()
    }

    pub fn persistence(&self) -> T {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram<T> {
    pub dim0: Vec<Bar<T>>,
    pub dim1: Vec<Bar<T>>,
    pub t_max: T,
}

/// Edge of the filtration; `i < j` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipsEdge<T> {
    pub len: T,
    pub i: u32,
    pub j: u32,
}

/// All pairwise edges up to `t_max`, sorted ascending by `(len, i, j)`.
/// Keeps the generating points so downstream reduction can rebuild exact
/// distances instead of trusting a lossy copy.
#[derive(Debug, Clone)]
pub struct RipsFiltration<T> {
    pub n: usize,
    pub edges: Vec<RipsEdge<T>>,
    pub t_max: T,
    points: Vec<Point3<T>>,
}

pub fn build_filtration<T: Real>(points: &PointCloud<T>, t_max: T) -> Result<RipsFiltration<T>> {
    if points.len() < 2 {
        return Err(Error::invalid("filtration needs at least 2 points"));
    }
    if !(t_max > T::zero()) {
        return Err(Error::invalid("t_max must be positive"));
    }
    let pts = &points.points;
    let mut edges = Vec::new();
    for j in 1..pts.len() {
        for i in 0..j {
            let len = pts[i].dist(pts[j]);
            if len <= t_max {
                edges.push(RipsEdge {
                    len,
                    i: i as u32,
                    j: j as u32,
                });
            }
        }
    }
    sort_edges(&mut edges);
    Ok(RipsFiltration {
        n: pts.len(),
        edges,
        t_max,
        points: pts.clone(),
    })
}

fn sort_edges<T: Real>(edges: &mut [RipsEdge<T>]) {
    edges.sort_unstable_by(|a, b| {
        fcmp(a.len, b.len)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
}

/// Square distance matrix; O(n²) memory, O(1) symmetric lookup.
struct DistMat<T> {
    n: usize,
    d: Vec<T>,
}

impl<T: Real> DistMat<T> {
    fn build(pts: &[Point3<T>]) -> Self {
        let n = pts.len();
        let mut d = vec![T::zero(); n * n];
        for j in 1..n {
            for i in 0..j {
                let v = pts[i].dist(pts[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.d[i * self.n + j]
    }

    fn all_edges(&self) -> Vec<RipsEdge<T>> {
        let mut edges = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for j in 1..self.n {
            for i in 0..j {
                edges.push(RipsEdge {
                    len: self.at(i, j),
                    i: i as u32,
                    j: j as u32,
                });
            }
        }
        sort_edges(&mut edges);
        edges
    }

    fn diameter(&self) -> T {
        self.d.iter().copied().fold(T::zero(), T::max)
    }

    /// Enclosing radius: min over i of max over j of d(i, j).
    fn enclosing_radius(&self) -> T {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.at(i, j))
                    .fold(T::zero(), T::max)
            })
            .fold(T::infinity(), T::min)
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            self.parent[x as usize] = self.parent[self.parent[x as usize] as usize];
            x = self.parent[x as usize];
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        true
    }
}

/// H0 of the full complex: n bars born at 0 whose finite deaths are the
/// minimum-spanning-tree edge lengths (zero-length deaths from duplicate
/// points are dropped), plus one infinite bar per connected component.
pub fn compute_h0<T: Real>(points: &PointCloud<T>) -> Vec<Bar<T>> {
    if points.is_empty() {
        return Vec::new();
    }
    let dm = DistMat::build(&points.points);
    let edges = dm.all_edges();
    let (bars, _forest) = kruskal_h0(&edges, points.len(), T::infinity());
    bars
}

/// Kruskal in exact filtration order `(len, i, j)`. Returns the H0 bars
/// against threshold `t_max` and, per input edge, whether it merged two
/// components (the "negative" edges that clearing later skips).
fn kruskal_h0<T: Real>(
    edges_sorted: &[RipsEdge<T>],
    n: usize,
    t_max: T,
) -> (Vec<Bar<T>>, Vec<bool>) {
    let mut uf = UnionFind::new(n);
    let mut forest = vec![false; edges_sorted.len()];
    let mut bars = Vec::new();
    let mut infinite = 1usize; // the component that survives everything
    for (k, e) in edges_sorted.iter().enumerate() {
        if uf.union(e.i, e.j) {
            forest[k] = true;
            if e.len > t_max {
                infinite += 1; // merge happens beyond the threshold
            } else if e.len > T::zero() {
                bars.push(Bar::finite(T::zero(), e.len));
            }
        }
    }
    // Components disconnected even in the complete graph (only possible for
    // empty edge lists, i.e. n == 1) are covered by the count below.
    let merged = forest.iter().filter(|&&f| f).count();
    infinite += n - 1 - merged;
    bars.sort_by(|a, b| fcmp(a.death, b.death));
    for _ in 0..infinite {
        bars.push(Bar::infinite(T::zero()));
    }
    (bars, forest)
}

/// Cofacet triangle in a working column: ordered by (diameter, packed
/// lexicographic key), both finite by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cofacet<T> {
    diam: T,
    key: u64,
}

impl<T: Real> Eq for Cofacet<T> {}
impl<T: Real> PartialOrd for Cofacet<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Cofacet<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        fcmp(self.diam, other.diam).then(self.key.cmp(&other.key))
    }
}

/// What a claimed pivot remembers about its column. `Lazy` means the reduced
/// column equals the raw coboundary of that edge (no additions happened
/// before the claim), so it can be regenerated instead of stored.
enum Stored {
    Lazy(u32),
    Full(Vec<u64>),
}

struct H1Reducer<'a, T> {
    dm: &'a DistMat<T>,
    edges: &'a [RipsEdge<T>],
    bits: Vec<u64>,
    words: usize,
    claimed: HashMap<u64, Stored>,
}

impl<'a, T: Real> H1Reducer<'a, T> {
    fn new(dm: &'a DistMat<T>, edges: &'a [RipsEdge<T>], t_eff: T, cap: u64) -> Result<Self> {
        let n = dm.n;
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for j in 1..n {
            for i in 0..j {
                if dm.at(i, j) <= t_eff {
                    bits[i * words + j / 64] |= 1 << (j % 64);
                    bits[j * words + i / 64] |= 1 << (i % 64);
                }
            }
        }
        let red = Self {
            dm,
            edges,
            bits,
            words,
            claimed: HashMap::new(),
        };
        // Size guard before any real work: count the complex's distinct
        // simplices. Each triangle shows up via all 3 of its edges.
        let mut triple_count: u64 = 0;
        let mut edge_count: u64 = 0;
        for e in edges {
            if e.len > t_eff {
                continue;
            }
            edge_count += 1;
            let ri = e.i as usize * words;
            let rj = e.j as usize * words;
            for w in 0..words {
                triple_count += u64::from((red.bits[ri + w] & red.bits[rj + w]).count_ones());
            }
        }
        let needed = edge_count.saturating_add(triple_count / 3);
        if needed > cap {
            return Err(Error::Budget { needed, cap });
        }
        Ok(red)
    }

    #[inline]
    fn key(&self, a: u32, b: u32, c: u32) -> u64 {
        let n = self.dm.n as u64;
        (u64::from(a) * n + u64::from(b)) * n + u64::from(c)
    }

    fn unpack(&self, key: u64) -> (u32, u32, u32) {
        let n = self.dm.n as u64;
        ((key / (n * n)) as u32, ((key / n) % n) as u32, (key % n) as u32)
    }

    fn triangle(&self, e: &RipsEdge<T>, k: u32) -> Cofacet<T> {
        let (i, j) = (e.i, e.j);
        let diam = e
            .len
            .max(self.dm.at(i as usize, k as usize))
            .max(self.dm.at(j as usize, k as usize));
        let (a, b, c) = sort3(i, j, k);
        Cofacet {
            diam,
            key: self.key(a, b, c),
        }
    }

    /// Visit cofacets of an edge: common neighbors of its endpoints within
    /// the effective threshold, which makes the triangle's diameter ≤ the
    /// threshold automatically.
    fn for_each_cofacet(&self, e: &RipsEdge<T>, mut f: impl FnMut(Cofacet<T>)) {
        let ri = e.i as usize * self.words;
        let rj = e.j as usize * self.words;
        for w in 0..self.words {
            let mut m = self.bits[ri + w] & self.bits[rj + w];
            while m != 0 {
                let bit = m.trailing_zeros();
                m &= m - 1;
                let k = (w * 64) as u32 + bit;
                f(self.triangle(e, k));
            }
        }
    }

    /// Reduce one positive-edge column; returns the resulting bar, if any.
    fn reduce_column(&mut self, idx: usize, t_max: T) -> Option<Bar<T>> {
        let e = self.edges[idx];
        // Fast path: minimal cofacet straight from the raw coboundary.
        let mut min: Option<Cofacet<T>> = None;
        self.for_each_cofacet(&e, |c| {
            if min.map_or(true, |m| c < m) {
                min = Some(c);
            }
        });
        let Some(mincof) = min else {
            return essential_bar(e.len, t_max);
        };
        if !self.claimed.contains_key(&mincof.key) {
            self.claimed.insert(mincof.key, Stored::Lazy(idx as u32));
            return bar_if_positive(e.len, mincof.diam);
        }
        self.reduce_column_slow(idx, t_max)
    }

    /// Collision path: materialize the working column as a heap and run the
    /// textbook reduction with lazy Z/2 cancellation.
    fn reduce_column_slow(&mut self, idx: usize, t_max: T) -> Option<Bar<T>> {
        let e = self.edges[idx];
        let mut heap: BinaryHeap<Reverse<Cofacet<T>>> = BinaryHeap::new();
        self.for_each_cofacet(&e, |c| heap.push(Reverse(c)));
        loop {
            let Some(pivot) = pop_pivot(&mut heap) else {
                return essential_bar(e.len, t_max);
            };
            match self.claimed.get(&pivot.key) {
                None => {
                    // Drain (with cancellation) to materialize the reduced
                    // column for future collisions.
                    let mut col = vec![pivot.key];
                    while let Some(c) = pop_pivot(&mut heap) {
                        col.push(c.key);
                    }
                    self.claimed.insert(pivot.key, Stored::Full(col));
                    return bar_if_positive(e.len, pivot.diam);
                }
                Some(Stored::Lazy(other)) => {
                    let other = self.edges[*other as usize];
                    heap.push(Reverse(pivot));
                    self.for_each_cofacet(&other, |c| heap.push(Reverse(c)));
                }
                Some(Stored::Full(keys)) => {
                    heap.push(Reverse(pivot));
                    for &key in keys {
                        let (a, b, c) = self.unpack(key);
                        let diam = self
                            .dm
                            .at(a as usize, b as usize)
                            .max(self.dm.at(a as usize, c as usize))
                            .max(self.dm.at(b as usize, c as usize));
                        heap.push(Reverse(Cofacet { diam, key }));
                    }
                }
            }
        }
    }
}

fn sort3(a: u32, b: u32, c: u32) -> (u32, u32, u32) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if c < lo {
        (c, lo, hi)
    } else if c < hi {
        (lo, c, hi)
    } else {
        (lo, hi, c)
    }
}

fn bar_if_positive<T: Real>(birth: T, death: T) -> Option<Bar<T>> {
    (death > birth).then(|| Bar::finite(birth, death))
}

/// A column that reduced to nothing is a cycle still alive at the threshold:
/// right-censor it there.
fn essential_bar<T: Real>(birth: T, t_max: T) -> Option<Bar<T>> {
    (birth < t_max).then(|| Bar {
        birth,
        death: t_max,
        censored: true,
    })
}

/// Pop the heap minimum after cancelling equal pairs mod 2.
fn pop_pivot<T: Real>(heap: &mut BinaryHeap<Reverse<Cofacet<T>>>) -> Option<Cofacet<T>> {
    loop {
        let top = heap.pop()?.0;
        if let Some(Reverse(next)) = heap.peek() {
            if next.key == top.key {
                heap.pop();
                continue;
            }
        }
        return Some(top);
    }
}

/// H1 pairs of the filtration by cohomological reduction. `cap` bounds the
/// number of simplices the reduction may touch (edges plus enumerated
/// triangle cofacets); exceeding it aborts with [`Error::Budget`].
pub fn compute_h1<T: Real>(filt: &RipsFiltration<T>, cap: u64) -> Result<Vec<Bar<T>>> {
    let dm = DistMat::build(&filt.points);
    let (_, forest) = kruskal_h0(&filt.edges, filt.n, T::infinity());
    h1_bars(&dm, &filt.edges, &forest, filt.t_max, cap)
}

fn h1_bars<T: Real>(
    dm: &DistMat<T>,
    edges_sorted: &[RipsEdge<T>],
    forest: &[bool],
    t_max: T,
    cap: u64,
) -> Result<Vec<Bar<T>>> {
    let t_eff = t_max.min(dm.enclosing_radius());
    let mut red = H1Reducer::new(dm, edges_sorted, t_eff, cap)?;
    let mut bars = Vec::new();
    for idx in (0..edges_sorted.len()).rev() {
        if forest[idx] || edges_sorted[idx].len > t_eff {
            continue;
        }
        if let Some(bar) = red.reduce_column(idx, t_max) {
            bars.push(bar);
        }
    }
    sort_bars(&mut bars);
    Ok(bars)
}

fn sort_bars<T: Real>(bars: &mut [Bar<T>]) {
    bars.sort_by(|a, b| fcmp(a.birth, b.birth).then(fcmp(a.death, b.death)));
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DiagramConfig<T> {
    /// Larger clouds are subsampled to this many points first.
    pub n_subsample: usize,
    pub seed: u64,
    /// Filtration threshold; `None` means the subsampled cloud's diameter,
    /// which guarantees no H1 bar is ever truncated.
    pub t_max: Option<T>,
    /// Abort if the reduction would touch more simplices than this. The
    /// default leaves ~3x headroom over a complete complex on 1000 points
    /// (the standard workload), while still catching runaway inputs.
    pub simplex_cap: u64,
    /// Use farthest-point instead of uniform subsampling.
    pub farthest_point: bool,
}

impl<T> Default for DiagramConfig<T> {
    fn default() -> Self {
        Self {
            n_subsample: 1000,
            seed: 0,
            t_max: None,
            simplex_cap: 500_000_000,
            farthest_point: false,
        }
    }
}

/// Full pipeline for one cloud: subsample, then H0 + H1.
pub fn diagram<T: Real>(
    points: &PointCloud<T>,
    cfg: &DiagramConfig<T>,
) -> Result<PersistenceDiagram<T>> {
    if points.is_empty() {
        return Err(Error::invalid("diagram of an empty point cloud"));
    }
    let cloud = if cfg.farthest_point {
        crate::mesh::subsample_farthest(points, cfg.n_subsample, cfg.seed)?
    } else {
        crate::mesh::subsample(points, cfg.n_subsample, cfg.seed)?
    };
    if let Some(t) = cfg.t_max {
        if !(t > T::zero()) {
            return Err(Error::invalid("t_max must be positive"));
        }
    }
    if cloud.len() == 1 {
        return Ok(PersistenceDiagram {
            dim0: vec![Bar::infinite(T::zero())],
            dim1: Vec::new(),
            t_max: cfg.t_max.unwrap_or_else(T::zero),
        });
    }
    let dm = DistMat::build(&cloud.points);
    let t_max = cfg.t_max.unwrap_or_else(|| dm.diameter());
    let edges = dm.all_edges();
    let (dim0, forest) = kruskal_h0(&edges, cloud.len(), t_max);
    let dim1 = if t_max > T::zero() {
        let within: Vec<RipsEdge<T>> = edges
            .iter()
            .copied()
            .filter(|e| e.len <= t_max)
            .collect();
        // Prefix property: the forest flags of a (len, i, j)-sorted prefix
        // are the prefix of the forest flags.
        let forest_within = &forest[..within.len()];
        h1_bars(&dm, &within, forest_within, t_max, cfg.simplex_cap)?
    } else {
        Vec::new()
    };
    Ok(PersistenceDiagram { dim0, dim1, t_max })
}

impl<T: Real> PersistenceDiagram<T> {
    /// Bars of one dimension (0 or 1).
    pub fn bars(&self, dim: usize) -> &[Bar<T>] {
        match dim {
            0 => &self.dim0,
            1 => &self.dim1,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> Value {
        fn dim_json<T: Real>(bars: &[Bar<T>]) -> (Value, Value) {
            let pairs: Vec<Value> = bars
                .iter()
                .map(|b| {
                    let death = if b.is_infinite() {
                        json!("inf")
                    } else {
                        json!(b.death.f64())
                    };
                    json!([b.birth.f64(), death])
                })
                .collect();
            let cens: Vec<Value> = bars.iter().map(|b| json!(b.censored)).collect();
            (Value::Array(pairs), Value::Array(cens))
        }
        let (d0, c0) = dim_json(&self.dim0);
        let (d1, c1) = dim_json(&self.dim1);
        json!({
            "dim0": d0,
            "dim1": d1,
            "t_max": self.t_max.f64(),
            "censored": { "dim0": c0, "dim1": c1 },
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = |name: &str| -> Result<Vec<Bar<T>>> {
            let arr = v
                .get(name)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::invalid(format!("diagram json missing '{name}'")))?;
            let cens = v
                .get("censored")
                .and_then(|c| c.get(name))
                .and_then(Value::as_array);
            arr.iter()
                .enumerate()
                .map(|(k, pair)| {
                    let pair = pair
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| Error::invalid("diagram bar must be [birth, death]"))?;
                    let birth = pair[0]
                        .as_f64()
                        .ok_or_else(|| Error::invalid("bad birth value"))?;
                    let death = match &pair[1] {
                        Value::String(s) if s == "inf" => f64::INFINITY,
                        Value::Number(x) => x
                            .as_f64()
                            .ok_or_else(|| Error::invalid("bad death value"))?,
                        _ => return Err(Error::invalid("death must be number or \"inf\"")),
                    };
                    let censored = cens
                        .and_then(|c| c.get(k))
                        .and_then(Value::as_bool)
                        .unwrap_or(false);
                    Ok(Bar {
                        birth: T::of(birth),
                        death: T::of(death),
                        censored,
                    })
                })
                .collect()
        };
        let t_max = v
            .get("t_max")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::invalid("diagram json missing 't_max'"))?;
        Ok(Self {
            dim0: dim("dim0")?,
            dim1: dim("dim1")?,
            t_max: T::of(t_max),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let v: Value = serde_json::from_reader(std::io::BufReader::new(file))?;
        Self::from_json(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3d;
    use rand::Rng;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud<f64> {
        PointCloud::new(pts.iter().map(|p| Point3d::new(p[0], p[1], p[2])).collect())
    }

    fn unit_square() -> PointCloud<f64> {
        cloud(&[[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.]])
    }

    fn finite_pairs(bars: &[Bar<f64>]) -> Vec<(f64, f64)> {
        bars.iter()
            .filter(|b| !b.is_infinite())
            .map(|b| (b.birth, b.death))
            .collect()
    }

    #[test]
    fn filtration_of_unit_square() {
        let f = build_filtration(&unit_square(), 2.0).unwrap();
        assert_eq!(f.n, 4);
        assert_eq!(f.edges.len(), 6);
        let ones = f.edges.iter().filter(|e| e.len == 1.0).count();
        let diags = f
            .edges
            .iter()
            .filter(|e| (e.len - 2f64.sqrt()).abs() < 1e-12)
            .count();
        assert_eq!((ones, diags), (4, 2));
        // Sorted ascending, i < j.
        for w in f.edges.windows(2) {
            assert!(w[0].len <= w[1].len);
        }
        assert!(f.edges.iter().all(|e| e.i < e.j));
    }

    #[test]
    fn filtration_respects_threshold() {
        let f = build_filtration(&unit_square(), 1.2).unwrap();
        assert_eq!(f.edges.len(), 4);
        let two = cloud(&[[0., 0., 0.], [5., 0., 0.]]);
        let f = build_filtration(&two, 10.0).unwrap();
        assert_eq!(f.edges.len(), 1);
        assert_eq!(f.edges[0].len, 5.0);
        assert!(build_filtration(&two, 0.0).is_err());
    }

    #[test]
    fn h0_three_collinear_points() {
        let bars = compute_h0(&cloud(&[[0., 0., 0.], [1., 0., 0.], [3., 0., 0.]]));
        assert_eq!(finite_pairs(&bars), vec![(0.0, 1.0), (0.0, 2.0)]);
        assert_eq!(bars.iter().filter(|b| b.is_infinite()).count(), 1);
    }

    #[test]
    fn h0_single_point() {
        let bars = compute_h0(&cloud(&[[5., 5., 5.]]));
        assert_eq!(bars.len(), 1);
        assert!(bars[0].is_infinite());
    }

    #[test]
    fn h0_duplicate_points_drop_zero_bars() {
        let bars = compute_h0(&cloud(&[[0., 0., 0.], [0., 0., 0.], [2., 0., 0.]]));
        assert_eq!(finite_pairs(&bars), vec![(0.0, 2.0)]);
    }

    #[test]
    fn h1_unit_square_is_one_bar() {
        let f = build_filtration(&unit_square(), 2.0).unwrap();
        let bars = compute_h1(&f, 1 << 20).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].birth, 1.0);
        assert!((bars[0].death - 2f64.sqrt()).abs() < 1e-15);
        assert!(!bars[0].censored);
    }

    #[test]
    fn h1_regular_hexagon() {
        let pts: Vec<[f64; 3]> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let f = build_filtration(&cloud(&pts), 2.5).unwrap();
        let bars = compute_h1(&f, 1 << 20).unwrap();
        assert_eq!(bars.len(), 1);
        assert!((bars[0].birth - 1.0).abs() < 1e-12);
        assert!((bars[0].death - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn h1_three_points_is_empty() {
        let f = build_filtration(&cloud(&[[0., 0., 0.], [4., 1., 0.], [2., 3., 0.]]), 10.0)
            .unwrap();
        assert!(compute_h1(&f, 1 << 20).unwrap().is_empty());
    }

    #[test]
    fn h1_truncation_censors_open_loops() {
        // Square with threshold below the diagonal: the loop is born at 1
        // but cannot die, so it is censored at t_max.
        let f = build_filtration(&unit_square(), 1.2).unwrap();
        let bars = compute_h1(&f, 1 << 20).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].birth, 1.0);
        assert_eq!(bars[0].death, 1.2);
        assert!(bars[0].censored);
    }

    #[test]
    fn fast_path_matches_naive_on_random_instances() {
        let mut rng = crate::rng::rng_from(2024);
        for round in 0..60 {
            let n = rng.gen_range(2..=8);
            // Integer grid coordinates provoke plenty of distance ties.
            let pts: Vec<Point3d> = (0..n)
                .map(|_| {
                    Point3d::new(
                        rng.gen_range(0..4) as f64,
                        rng.gen_range(0..4) as f64,
                        rng.gen_range(0..4) as f64,
                    )
                })
                .collect();
            let pc = PointCloud::new(pts.clone());
            let fast = diagram(&pc, &DiagramConfig::default()).unwrap();
            let slow = naive::diagram(&pts, None);
            assert_eq!(
                finite_pairs(&fast.dim0),
                finite_pairs(&slow.dim0),
                "round {round}: H0 mismatch on {pts:?}"
            );
            assert_eq!(
                finite_pairs(&fast.dim1),
                finite_pairs(&slow.dim1),
                "round {round}: H1 mismatch on {pts:?}"
            );
        }
    }

    #[test]
    fn circle_cloud_has_one_dominant_loop() {
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 20.0;
                [100.0 * a.cos(), 100.0 * a.sin(), 0.0]
            })
            .collect();
        let d = diagram(&cloud(&pts), &DiagramConfig::default()).unwrap();
        let mut pers: Vec<f64> = d.dim1.iter().map(|b| b.persistence()).collect();
        pers.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(!pers.is_empty());
        if pers.len() > 1 {
            assert!(pers[0] > 5.0 * pers[1]);
        }
    }

    #[test]
    fn scaling_scales_all_bars_exactly() {
        let mut rng = crate::rng::rng_from(11);
        let pts: Vec<Point3d> = (0..40)
            .map(|_| Point3d::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let c = 4.0; // power of two: distances scale exactly
        let scaled: Vec<Point3d> = pts.iter().map(|p| *p * c).collect();
        let d1 = diagram(&PointCloud::new(pts), &DiagramConfig::default()).unwrap();
        let d2 = diagram(&PointCloud::new(scaled), &DiagramConfig::default()).unwrap();
        assert_eq!(d1.dim1.len(), d2.dim1.len());
        for (a, b) in d1.dim1.iter().zip(&d2.dim1) {
            assert_eq!(a.birth * c, b.birth);
            assert_eq!(a.death * c, b.death);
        }
        let f1: Vec<f64> = finite_pairs(&d1.dim0).iter().map(|p| p.1 * c).collect();
        let f2: Vec<f64> = finite_pairs(&d2.dim0).iter().map(|p| p.1).collect();
        assert_eq!(f1, f2);
    }

    #[test]
    fn permuting_points_leaves_bars_unchanged() {
        let mut rng = crate::rng::rng_from(3);
        let pts: Vec<Point3d> = (0..30)
            .map(|_| Point3d::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let mut perm = pts.clone();
        perm.reverse();
        perm.swap(0, 7);
        let a = diagram(&PointCloud::new(pts), &DiagramConfig::default()).unwrap();
        let b = diagram(&PointCloud::new(perm), &DiagramConfig::default()).unwrap();
        let key = |bars: &[Bar<f64>]| {
            let mut v: Vec<(u64, u64)> = bars
                .iter()
                .map(|b| (b.birth.to_bits(), b.death.to_bits()))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&a.dim0), key(&b.dim0));
        assert_eq!(key(&a.dim1), key(&b.dim1));
    }

    #[test]
    fn h0_finite_bar_count_tracks_components() {
        // Two clusters 100 apart, t_max = 10: one merge is out of reach.
        let pts = cloud(&[
            [0., 0., 0.],
            [1., 0., 0.],
            [100., 0., 0.],
            [101., 0., 0.],
        ]);
        let d = diagram(
            &pts,
            &DiagramConfig {
                t_max: Some(10.0),
                ..DiagramConfig::default()
            },
        )
        .unwrap();
        assert_eq!(finite_pairs(&d.dim0).len(), 2); // n=4 minus 2 components
        assert_eq!(d.dim0.iter().filter(|b| b.is_infinite()).count(), 2);
    }

    #[test]
    fn budget_cap_aborts_cleanly() {
        let pts: Vec<[f64; 3]> = (0..30)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 30.0;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let err = diagram(
            &cloud(&pts),
            &DiagramConfig {
                simplex_cap: 10,
                ..DiagramConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Budget { .. }), "got {err:?}");
    }

    #[test]
    fn subsampling_in_diagram_is_deterministic() {
        let mut rng = crate::rng::rng_from(8);
        let pts: Vec<Point3d> = (0..300)
            .map(|_| Point3d::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let cfg = DiagramConfig {
            n_subsample: 60,
            seed: 42,
            ..DiagramConfig::default()
        };
        let pc = PointCloud::new(pts);
        let a = diagram(&pc, &cfg).unwrap();
        let b = diagram(&pc, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let d = PersistenceDiagram {
            dim0: vec![Bar::finite(0.0, 1.5), Bar::infinite(0.0)],
            dim1: vec![
                Bar::finite(1.0, 2f64.sqrt()),
                Bar {
                    birth: 0.5,
                    death: 2.0,
                    censored: true,
                },
            ],
            t_max: 2.0,
        };
        let v = d.to_json();
        assert_eq!(v["dim0"][1][1], serde_json::json!("inf"));
        assert_eq!(v["censored"]["dim1"][1], serde_json::json!(true));
        let back = PersistenceDiagram::<f64>::from_json(&v).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn diagram_of_single_point_cloud() {
        let d = diagram(&cloud(&[[1., 2., 3.]]), &DiagramConfig::default()).unwrap();
        assert_eq!(d.dim0.len(), 1);
        assert!(d.dim0[0].is_infinite());
        assert!(d.dim1.is_empty());
    }

    /// Timing probe for the reduction at production scale; run with
    /// `cargo test -p papillae perf_probe -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn perf_probe_n1000() {
        let mut rng = crate::rng::rng_from(1);
        // Bumpy disk, roughly what a real segment subsample looks like.
        let pts: Vec<Point3d> = (0..1000)
            .map(|_| {
                let r = 450.0 * rng.gen::<f64>().sqrt();
                let a = rng.gen::<f64>() * std::f64::consts::TAU;
                let z = 80.0 * (r / 90.0).sin() + rng.gen_range(-5.0..5.0);
                Point3d::new(r * a.cos(), r * a.sin(), z)
            })
            .collect();
        let t0 = std::time::Instant::now();
        let d = diagram(&PointCloud::new(pts), &DiagramConfig::default()).unwrap();
        println!(
            "n=1000 diagram in {:?}: {} H0 bars, {} H1 bars",
            t0.elapsed(),
            d.dim0.len(),
            d.dim1.len()
        );
    }

    #[test]
    fn rotated_cloud_gives_same_diagram_within_tolerance() {
        let mut rng = crate::rng::rng_from(17);
        let pts: Vec<Point3d> = (0..50)
            .map(|_| Point3d::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let (s, c) = (0.6f64.sin(), 0.6f64.cos());
        let rot: Vec<Point3d> = pts
            .iter()
            .map(|p| Point3d::new(c * p.x - s * p.y + 10.0, s * p.x + c * p.y - 3.0, p.z))
            .collect();
        let a = diagram(&PointCloud::new(pts), &DiagramConfig::default()).unwrap();
        let b = diagram(&PointCloud::new(rot), &DiagramConfig::default()).unwrap();
        assert_eq!(a.dim1.len(), b.dim1.len());
        for (x, y) in a.dim1.iter().zip(&b.dim1) {
            assert!((x.birth - y.birth).abs() < 1e-9);
            assert!((x.death - y.death).abs() < 1e-9);
        }
    }
}
