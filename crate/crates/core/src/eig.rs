//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Plane rotations annihilate off-diagonal entries sweep by sweep; the
//! accumulated rotations form the eigenvector matrix. Convergence is declared
//! when the off-diagonal Frobenius mass falls below `1e-12 * ||A||_F`.
//! Eigenvalues are returned in descending order and each eigenvector's
//! largest-magnitude entry is made positive (ties broken by lowest index), so
//! repeated runs on identical input are bitwise identical.

use crate::error::{Error, Result};
use crate::mat::{Matrix, SymMatrix};

const SWEEP_LIMIT: usize = 100;
const OFF_DIAG_REL_TOL: f64 = 1e-12;

/// Full eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    /// Eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column-orthonormal matrix; column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
}

fn off_diag_frobenius(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let v = a.get(p, q);
            s += 2.0 * v * v;
        }
    }
    s.sqrt()
}

/// Eigendecomposition satisfying `A v_k = lambda_k v_k` to roughly machine
/// precision; errors only if the sweep limit is exhausted.
pub fn symmetric_eig(a: &SymMatrix) -> Result<EigDecomp> {
    if !a.is_finite() {
        return Err(Error::NonFinite { context: "eigendecomposition input" });
    }
    let n = a.dim();
    let mut w = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            w.set(j, k, a.get(j, k));
        }
    }
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    let tol = OFF_DIAG_REL_TOL * norm;

    if n > 1 && norm > 0.0 {
        let mut converged = false;
        for _sweep in 0..SWEEP_LIMIT {
            if off_diag_frobenius(&w) <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = w.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    // Rotation angle that zeroes w[p][q].
                    let theta = 0.5 * (w.get(q, q) - w.get(p, p)) / apq;
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    for i in 0..n {
                        let wip = w.get(i, p);
                        let wiq = w.get(i, q);
                        w.set(i, p, c * wip - s * wiq);
                        w.set(i, q, s * wip + c * wiq);
                    }
                    for i in 0..n {
                        let wpi = w.get(p, i);
                        let wqi = w.get(q, i);
                        w.set(p, i, c * wpi - s * wqi);
                        w.set(q, i, s * wpi + c * wqi);
                    }
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, c * vip - s * viq);
                        v.set(i, q, s * vip + c * viq);
                    }
                }
            }
        }
        if !converged && off_diag_frobenius(&w) > tol {
            return Err(Error::EigNoConvergence(SWEEP_LIMIT));
        }
    }

    // Sort descending; stable on ties so output is deterministic.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.get(j, j).total_cmp(&w.get(i, i)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(w.get(src, src));
        // Sign convention: largest-magnitude entry positive, lowest index on ties.
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = v.get(i, src).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        let flip = if v.get(best, src) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, dst, flip * v.get(i, src));
        }
    }

    Ok(EigDecomp { eigenvalues, eigenvectors: vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn reconstruct(d: &EigDecomp) -> Matrix {
        let n = d.eigenvalues.len();
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for q in 0..n {
                    s += d.eigenvectors.get(j, q) * d.eigenvalues[q] * d.eigenvectors.get(k, q);
                }
                m.set(j, k, s);
            }
        }
        m
    }

    #[test]
    fn identity_matrix() {
        let d = symmetric_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_matrix() {
        let mut a = SymMatrix::zeros(2);
        a.set_sym(0, 0, 3.0);
        a.set_sym(1, 1, 1.0);
        let d = symmetric_eig(&a).unwrap();
        assert_eq!(d.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(d.eigenvectors.get(0, 0), 1.0);
        assert_eq!(d.eigenvectors.get(1, 1), 1.0);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for &n in &[2usize, 3, 6, 12, 25, 50] {
            let a = SymMatrix::from_upper_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let d = symmetric_eig(&a).unwrap();
            let rec = reconstruct(&d);
            let scale = a.max_abs().max(1.0);
            for j in 0..n {
                for k in 0..n {
                    assert!(
                        (rec.get(j, k) - a.get(j, k)).abs() <= 1e-10 * scale,
                        "n={n} entry ({j},{k})"
                    );
                }
            }
            // V^T V = I
            for c1 in 0..n {
                for c2 in 0..n {
                    let mut dot = 0.0;
                    for r in 0..n {
                        dot += d.eigenvectors.get(r, c1) * d.eigenvectors.get(r, c2);
                    }
                    let want = if c1 == c2 { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
            for w in d.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn deterministic_reruns() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let a = SymMatrix::from_upper_fn(9, |_, _| rng.random_range(-2.0..2.0));
        let d1 = symmetric_eig(&a).unwrap();
        let d2 = symmetric_eig(&a).unwrap();
        assert_eq!(d1.eigenvalues, d2.eigenvalues);
        assert_eq!(d1.eigenvectors.data(), d2.eigenvectors.data());
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = SymMatrix::zeros(2);
        a.set_sym(0, 1, f64::NAN);
        assert!(symmetric_eig(&a).is_err());
    }
}
