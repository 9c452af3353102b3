//! Exact kd-tree over 3D points for radius and k-nearest queries.
//!
//! Exactness matters: downstream features count points in closed balls, so an
//! approximate index would silently move feature values. Queries compare
//! squared distances and include the boundary (`d == r` is a hit).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::Point3;
use crate::Real;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Immutable spatial index; build once, query from any thread.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Vec<Point3<T>>,
    /// Point indices permuted so each node owns a contiguous slice.
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Point3<T>]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = if points.is_empty() {
            nodes.push(Node::Leaf { start: 0, end: 0 });
            0
        } else {
            let n = points.len();
            build_node(points, &mut order, 0, n, &mut nodes)
        };
        Self {
            points: points.to_vec(),
            order,
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points with `‖p − center‖ ≤ r`, ascending.
    pub fn radius(&self, center: Point3<T>, r: T) -> Vec<u32> {
        let mut out = Vec::new();
        if r < T::zero() || self.points.is_empty() {
            return out;
        }
        let r2 = r * r;
        self.radius_rec(self.root, center, r, r2, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: u32, c: Point3<T>, r: T, r2: T, out: &mut Vec<u32>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start as usize..*end as usize] {
                    if self.points[i as usize].dist_sq(c) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
                ..
            } => {
                let cv = axis_coord(c, *axis).f64();
                let d = cv - value;
                let (near, far) = if d <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.radius_rec(near, c, r, r2, out);
                if T::of(d.abs()) <= r {
                    self.radius_rec(far, c, r, r2, out);
                }
            }
        }
    }

    /// The `k` nearest points, sorted by (distance, index). Ties at equal
    /// distance prefer the lower index, so results are deterministic.
    pub fn k_nearest(&self, center: Point3<T>, k: usize) -> Vec<(u32, T)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapItem<T>> = BinaryHeap::with_capacity(k + 1);
        self.nearest_rec(self.root, center, k, &mut heap);
        let mut out: Vec<(u32, T)> = heap.into_iter().map(|h| (h.index, h.dist2)).collect();
        out.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        for item in &mut out {
            item.1 = item.1.sqrt();
        }
        out
    }

    fn nearest_rec(&self, node: u32, c: Point3<T>, k: usize, heap: &mut BinaryHeap<HeapItem<T>>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start as usize..*end as usize] {
                    let d2 = self.points[i as usize].dist_sq(c);
                    let item = HeapItem { dist2: d2, index: i };
                    if heap.len() < k {
                        heap.push(item);
                    } else if let Some(top) = heap.peek() {
                        if item < *top {
                            heap.pop();
                            heap.push(item);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
                ..
            } => {
                let cv = axis_coord(c, *axis).f64();
                let d = cv - value;
                let (near, far) = if d <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.nearest_rec(near, c, k, heap);
                let worst = heap.peek().map(|h| h.dist2);
                let plane_d2 = T::of(d * d);
                let must_visit = heap.len() < k
                    || worst.map(|w| plane_d2 <= w).unwrap_or(true);
                if must_visit {
                    self.nearest_rec(far, c, k, heap);
                }
            }
        }
    }
}

fn axis_coord<T: Real>(p: Point3<T>, axis: u8) -> T {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn build_node<T: Real>(
    points: &[Point3<T>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    // Split on the widest axis at the median.
    let slice = &order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice {
        let p = points[i as usize];
        for (a, c) in [p.x, p.y, p.z].into_iter().enumerate() {
            let c = c.f64();
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            (hi[a] - lo[a])
                .partial_cmp(&(hi[b] - lo[b]))
                .unwrap_or(Ordering::Equal)
        })
        .unwrap() as u8;
    let mid = start + len / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
        let a = axis_coord(points[i as usize], axis).f64();
        let b = axis_coord(points[j as usize], axis).f64();
        a.partial_cmp(&b).unwrap_or(Ordering::Equal).then(i.cmp(&j))
    });
    let value = axis_coord(points[order[mid] as usize], axis).f64();

    let placeholder = nodes.len() as u32;
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(points, order, start, mid, nodes);
    let right = build_node(points, order, mid, end, nodes);
    nodes[placeholder as usize] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    placeholder
}

/// Max-heap item keyed by (distance², index); the heap top is the current
/// worst candidate.
#[derive(Debug, Clone, Copy)]
struct HeapItem<T> {
    dist2: T,
    index: u32,
}

impl<T: Real> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dist2 == other.dist2 && self.index == other.index
    }
}
impl<T: Real> Eq for HeapItem<T> {}
impl<T: Real> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&other.dist2)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}
