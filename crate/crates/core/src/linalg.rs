//! Dense symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! The matrices here are tiny (3x3 plane covariances, feature-count-sized
//! PCA covariances), so the quadratically convergent Jacobi scheme is both
//! fast enough and fully deterministic across platforms.

use crate::Real;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors[k]` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// Decompose a symmetric matrix given as full square rows.
///
/// Only the upper triangle is read; the caller is trusted on symmetry.
/// Panics if the matrix is empty or non-square.
pub fn eigh_sym<T: Real>(a: &[Vec<T>]) -> SymEig<T> {
    let n = a.len();
    assert!(n > 0, "empty matrix");
    assert!(a.iter().all(|r| r.len() == n), "non-square matrix");

    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v = vec![vec![T::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }

    let frob = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt();
    let tol = T::epsilon() * frob.max(T::one());

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::two() * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).expect("finite eigenvalues"));

    let values = order.iter().map(|&k| m[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i][k]).collect())
        .collect();
    SymEig { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    fn residual(a: &[Vec<f64>], lambda: f64, v: &[f64]) -> f64 {
        let n = a.len();
        (0..n)
            .map(|i| {
                let av: f64 = (0..n).map(|j| a[i][j] * v[j]).sum();
                (av - lambda * v[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = mat(&[&[3.0, 0.0], &[0.0, -1.0]]);
        let e = eigh_sym(&a);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = eigh_sym(&a);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        for (l, v) in e.values.iter().zip(&e.vectors) {
            assert!(residual(&a, *l, v) < 1e-10);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 6, 12] {
            let mut a = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for j in i..n {
                    let x = rng.gen_range(-2.0..2.0);
                    a[i][j] = x;
                    a[j][i] = x;
                }
            }
            let e = eigh_sym(&a);
            for (l, v) in e.values.iter().zip(&e.vectors) {
                assert!(residual(&a, *l, v) < 1e-8, "n={n}: bad eigenpair");
            }
            for i in 0..n {
                for j in 0..n {
                    let d: f64 = e.vectors[i]
                        .iter()
                        .zip(&e.vectors[j])
                        .map(|(x, y)| x * y)
                        .sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-9);
                }
            }
            // Trace is preserved by similarity transforms.
            let tr: f64 = (0..n).map(|i| a[i][i]).sum();
            let sum: f64 = e.values.iter().sum();
            assert!((tr - sum).abs() < 1e-9);
        }
    }
}
