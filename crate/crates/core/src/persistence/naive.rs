//! Textbook persistence by full boundary-matrix reduction.
//!
//! Every simplex up to dimension 2 is materialized, sorted by
//! (diameter, dimension, lexicographic vertices), and reduced column by
//! column. Cubic-ish in the simplex count and exponential in n, so this is
//! only usable for tiny instances — it exists purely as an oracle and shares
//! no code with the production reduction.

use std::collections::HashMap;

use crate::geom::Point3;
use crate::num::fcmp;
use crate::persistence::{Bar, PersistenceDiagram};
use crate::Real;

#[derive(Debug, Clone, Copy)]
struct Simplex<T> {
    diam: T,
    dim: u8,
    verts: [u32; 3], // ascending; unused slots = u32::MAX
}

/// Persistence of the Rips complex on `points` up to `t_max`
/// (`None` = the full complex at the point-set diameter, so that nothing in
/// dimension 1 is ever left open). Zero-persistence pairs are dropped;
/// dimension-1 classes still alive at an explicit `t_max` are right-censored
/// there, mirroring the production convention.
pub fn diagram<T: Real>(points: &[Point3<T>], t_max: Option<T>) -> PersistenceDiagram<T> {
    let n = points.len();
    let d = |i: usize, j: usize| points[i].dist(points[j]);
    let mut diameter = T::zero();
    for j in 1..n {
        for i in 0..j {
            diameter = diameter.max(d(i, j));
        }
    }
    let explicit = t_max.is_some();
    let t_max = t_max.unwrap_or(diameter);

    let mut simplices: Vec<Simplex<T>> = Vec::new();
    for v in 0..n as u32 {
        simplices.push(Simplex {
            diam: T::zero(),
            dim: 0,
            verts: [v, u32::MAX, u32::MAX],
        });
    }
    for j in 1..n {
        for i in 0..j {
            let diam = d(i, j);
            if diam <= t_max {
                simplices.push(Simplex {
                    diam,
                    dim: 1,
                    verts: [i as u32, j as u32, u32::MAX],
                });
            }
        }
    }
    for k in 2..n {
        for j in 1..k {
            for i in 0..j {
                let diam = d(i, j).max(d(i, k)).max(d(j, k));
                if diam <= t_max {
                    simplices.push(Simplex {
                        diam,
                        dim: 2,
                        verts: [i as u32, j as u32, k as u32],
                    });
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        fcmp(a.diam, b.diam)
            .then(a.dim.cmp(&b.dim))
            .then(a.verts.cmp(&b.verts))
    });

    let pos: HashMap<[u32; 3], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.verts, i))
        .collect();

    // Boundary columns as ascending position lists.
    let columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|s| {
            let mut col: Vec<usize> = match s.dim {
                0 => Vec::new(),
                1 => vec![
                    pos[&[s.verts[0], u32::MAX, u32::MAX]],
                    pos[&[s.verts[1], u32::MAX, u32::MAX]],
                ],
                _ => vec![
                    pos[&[s.verts[0], s.verts[1], u32::MAX]],
                    pos[&[s.verts[0], s.verts[2], u32::MAX]],
                    pos[&[s.verts[1], s.verts[2], u32::MAX]],
                ],
            };
            col.sort_unstable();
            col
        })
        .collect();

    let mut reduced: Vec<Vec<usize>> = Vec::with_capacity(columns.len());
    let mut low_of: HashMap<usize, usize> = HashMap::new();
    let mut paired = vec![false; columns.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let mut col = col.clone();
        while let Some(&low) = col.last() {
            match low_of.get(&low) {
                Some(&other) => col = xor(&col, &reduced[other]),
                None => break,
            }
        }
        if let Some(&low) = col.last() {
            low_of.insert(low, j);
            paired[low] = true;
            paired[j] = true;
            pairs.push((low, j));
        }
        reduced.push(col);
    }

    let mut dim0 = Vec::new();
    let mut dim1 = Vec::new();
    for (i, j) in pairs {
        let (birth, death) = (simplices[i].diam, simplices[j].diam);
        if death > birth {
            match simplices[i].dim {
                0 => dim0.push(Bar::finite(birth, death)),
                1 => dim1.push(Bar::finite(birth, death)),
                _ => {}
            }
        }
    }
    for (i, s) in simplices.iter().enumerate() {
        if !paired[i] {
            match s.dim {
                0 => dim0.push(Bar::infinite(T::zero())),
                1 => {
                    if explicit && s.diam < t_max {
                        dim1.push(Bar {
                            birth: s.diam,
                            death: t_max,
                            censored: true,
                        });
                    }
                }
                _ => {}
            }
        }
    }
    dim0.sort_by(|a, b| fcmp(a.death, b.death));
    dim1.sort_by(|a, b| fcmp(a.birth, b.birth).then(fcmp(a.death, b.death)));
    PersistenceDiagram { dim0, dim1, t_max }
}

fn xor(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}
