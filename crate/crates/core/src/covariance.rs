//! Robust covariance estimation.
//!
//! Two robust estimators plus the classical baseline:
//! - `utype_covariance`: average of pairwise-difference rank-one terms with
//!   the influence of each pair clipped through `psi_tau` applied to its sole
//!   nonzero eigenvalue `||d||^2 / 2`. Computed in the scalar-weight form,
//!   O(n^2 p) time.
//! - `adaptive_huber_covariance`: entrywise robust moments
//!   `theta_jk - mu_j mu_k` from one-dimensional Huber fits.
//! - `sample_covariance`: the unbiased (n-1 divisor) estimator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::huber::{self, HuberParam, TauPer};
use crate::mat::{DataMatrix, SymMatrix};
use crate::tuning::robust_scale;

/// Robustification rule for the off-diagonal covariance moments.
#[derive(Debug, Clone, PartialEq)]
pub enum CovTau {
    /// One parameter for every entry.
    Shared(HuberParam),
    /// `tau_jk = mult * scale(products_jk)`: a shared dimensionless constant
    /// with each entry's own robust scale, so heterogeneous columns are
    /// trimmed at comparable relative depths.
    ScaledPerEntry { mult: f64 },
}

impl CovTau {
    fn for_products(&self, products: &[f64]) -> Result<HuberParam> {
        match self {
            CovTau::Shared(t) => Ok(*t),
            CovTau::ScaledPerEntry { mult } => HuberParam::new(mult * robust_scale(products)),
        }
    }
}

/// Accumulator buffer with Neumaier compensation; the pair loop sums n^2
/// terms of mixed sign.
struct CompensatedBuf {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedBuf {
    fn new(len: usize) -> Self {
        CompensatedBuf { sum: vec![0.0; len], comp: vec![0.0; len] }
    }

    #[inline]
    fn add(&mut self, idx: usize, v: f64) {
        let s = self.sum[idx];
        let t = s + v;
        self.comp[idx] += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        self.sum[idx] = t;
    }

    fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// U-statistic covariance with eigenvalue-level clipping of each rank-one
/// pairwise term. Pairs with identical rows contribute the zero matrix.
pub fn utype_covariance(data: &DataMatrix, tau: HuberParam) -> Result<SymMatrix> {
    let n = data.n();
    let p = data.p();
    if n < 2 {
        return Err(Error::TooFewSamples { context: "utype_covariance", min: 2, got: n });
    }
    let tau_v = tau.value();

    // Upper triangle (j <= k), flattened.
    let tri = p * (p + 1) / 2;
    let mut acc = CompensatedBuf::new(tri);
    let mut diff = vec![0.0; p];
    for i in 0..n - 1 {
        let ri = data.row(i);
        for j in i + 1..n {
            let rj = data.row(j);
            let mut sq = 0.0;
            for (d, (a, b)) in diff.iter_mut().zip(ri.iter().zip(rj)) {
                *d = a - b;
                sq += *d * *d;
            }
            if sq == 0.0 {
                continue;
            }
            // psi_tau(||d||^2 / 2) / ||d||^2 is the clipped eigenvalue weight.
            let half = 0.5 * sq;
            let w = if half <= tau_v { 0.5 } else { tau_v / sq };
            let mut idx = 0;
            for a in 0..p {
                let da = w * diff[a];
                for b in a..p {
                    acc.add(idx, da * diff[b]);
                    idx += 1;
                }
            }
        }
    }

    let sums = acc.finish();
    let pairs = (n * (n - 1) / 2) as f64;
    let mut out = SymMatrix::zeros(p);
    let mut idx = 0;
    for a in 0..p {
        for b in a..p {
            out.set_sym(a, b, sums[idx] / pairs);
            idx += 1;
        }
    }
    Ok(out)
}

/// Entrywise adaptive Huber covariance: `theta_jk - mu_j mu_k`, where
/// `theta_jk` is the robust location of the products `X_ij X_ik` under
/// `tau_cov` and `mu_j` the robust mean under `tau_mean`. Only `j <= k` is
/// computed; symmetry is by construction.
pub fn adaptive_huber_covariance(
    data: &DataMatrix,
    tau_mean: HuberParam,
    tau_cov: HuberParam,
) -> Result<SymMatrix> {
    adaptive_huber_covariance_general(
        data,
        &TauPer::Shared(tau_mean),
        &CovTau::Shared(tau_cov),
        &TauPer::Shared(tau_cov),
    )
}

/// [`adaptive_huber_covariance`] with the parameter layout the pipeline uses:
/// per-column means, per-entry (or shared) off-diagonal moments, and a
/// separate per-column parameter for the diagonal, whose squared-observation
/// moments live at the per-coordinate rate rather than the entrywise one.
pub fn adaptive_huber_covariance_general(
    data: &DataMatrix,
    tau_mean: &TauPer,
    tau_cov: &CovTau,
    tau_diag: &TauPer,
) -> Result<SymMatrix> {
    let n = data.n();
    let p = data.p();
    if n < 2 {
        return Err(Error::TooFewSamples { context: "adaptive_huber_covariance", min: 2, got: n });
    }
    tau_mean.check_len(p)?;
    tau_diag.check_len(p)?;

    let means = robust_col_means_per(data, tau_mean)?;

    let entries: Vec<(usize, usize)> =
        (0..p).flat_map(|j| (j..p).map(move |k| (j, k))).collect();
    let moments: Vec<f64> = entries
        .par_iter()
        .map(|&(j, k)| {
            let products: Vec<f64> = (0..n).map(|i| data.get(i, j) * data.get(i, k)).collect();
            let tau = if j == k {
                tau_diag.get(j)
            } else {
                tau_cov.for_products(&products).map_err(|e| Error::at_entry(j, k, e))?
            };
            huber::huber_pairwise_moment(&products, tau)
                .map_err(|e| Error::at_entry(j, k, e))
        })
        .collect::<Result<_>>()?;

    let mut out = SymMatrix::zeros(p);
    for (&(j, k), &theta) in entries.iter().zip(&moments) {
        out.set_sym(j, k, theta - means[j] * means[k]);
    }
    Ok(out)
}

/// Robust mean per column; errors are tagged with the column index.
pub fn robust_col_means(data: &DataMatrix, tau: HuberParam) -> Result<Vec<f64>> {
    robust_col_means_per(data, &TauPer::Shared(tau))
}

/// [`robust_col_means`] with per-column parameters.
pub fn robust_col_means_per(data: &DataMatrix, tau: &TauPer) -> Result<Vec<f64>> {
    tau.check_len(data.p())?;
    (0..data.p())
        .into_par_iter()
        .map(|j| {
            let col = data.col_vec(j);
            huber::huber_location(&col, tau.get(j), huber::DEFAULT_TOL, huber::DEFAULT_MAX_ITER)
                .map(|e| e.value)
                .map_err(|e| Error::at_column(j, e))
        })
        .collect()
}

/// Unbiased sample covariance (divisor n-1).
pub fn sample_covariance(data: &DataMatrix) -> Result<SymMatrix> {
    let n = data.n();
    let p = data.p();
    if n < 2 {
        return Err(Error::TooFewSamples { context: "sample_covariance", min: 2, got: n });
    }
    let means = data.col_means();
    let mut out = SymMatrix::zeros(p);
    for j in 0..p {
        for k in j..p {
            let mut s = 0.0;
            for i in 0..n {
                s += (data.get(i, j) - means[j]) * (data.get(i, k) - means[k]);
            }
            out.set_sym(j, k, s / (n as f64 - 1.0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::huber::oracle::bisection_location;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn dm(n: usize, p: usize, v: Vec<f64>) -> DataMatrix {
        DataMatrix::new(n, p, v).unwrap()
    }

    #[test]
    fn utype_identical_rows_zero() {
        let d = dm(2, 3, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let s = utype_covariance(&d, HuberParam::new(1.0).unwrap()).unwrap();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn utype_large_tau_equals_sample_covariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 20;
        let p = 4;
        let vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let d = dm(n, p, vals);
        // tau beyond every pairwise half squared distance: identity regime.
        let mut max_half = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let sq: f64 = d
                    .row(i)
                    .iter()
                    .zip(d.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                max_half = max_half.max(0.5 * sq);
            }
        }
        let s = utype_covariance(&d, HuberParam::new(max_half + 1.0).unwrap()).unwrap();
        let sc = sample_covariance(&d).unwrap();
        for j in 0..p {
            for k in 0..p {
                assert!((s.get(j, k) - sc.get(j, k)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn utype_three_point_hand_computed() {
        // X1=(0,0), X2=(1,0), X3=(0,2), tau=1; direct evaluation of the
        // scalar weight per pair:
        //   (1,2): d=(-1,0),  ||d||^2=1, half=0.5<=1 -> w=1/2
        //   (1,3): d=(0,-2),  ||d||^2=4, half=2>1    -> w=1/4
        //   (2,3): d=(1,-2),  ||d||^2=5, half=2.5>1  -> w=1/5
        let d = dm(3, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
        let s = utype_covariance(&d, HuberParam::new(1.0).unwrap()).unwrap();
        let want = [
            [(0.5 + 0.2) / 3.0, -0.4 / 3.0],
            [-0.4 / 3.0, (1.0 + 0.8) / 3.0],
        ];
        for j in 0..2 {
            for k in 0..2 {
                assert!((s.get(j, k) - want[j][k]).abs() < 1e-14, "({j},{k})");
            }
        }
    }

    #[test]
    fn utype_translation_invariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..10 * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d = dm(10, 3, vals.clone());
        let shifted: Vec<f64> = vals
            .chunks(3)
            .flat_map(|r| [r[0] + 5.0, r[1] - 2.0, r[2] + 0.25])
            .collect();
        let ds = dm(10, 3, shifted);
        let tau = HuberParam::new(2.0).unwrap();
        let a = utype_covariance(&d, tau).unwrap();
        let b = utype_covariance(&ds, tau).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn huber_cov_infinite_tau_is_plugin_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let n = 25;
        let p = 3;
        let vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d = dm(n, p, vals);
        let s =
            adaptive_huber_covariance(&d, HuberParam::INFINITE, HuberParam::INFINITE).unwrap();
        let means = d.col_means();
        for j in 0..p {
            for k in 0..p {
                let m: f64 =
                    (0..n).map(|i| d.get(i, j) * d.get(i, k)).sum::<f64>() / n as f64;
                assert!((s.get(j, k) - (m - means[j] * means[k])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn huber_cov_constant_column_zeroes() {
        let mut vals = Vec::new();
        for i in 0..8 {
            vals.extend_from_slice(&[2.0, i as f64]);
        }
        let d = dm(8, 2, vals);
        let s = adaptive_huber_covariance(
            &d,
            HuberParam::new(50.0).unwrap(),
            HuberParam::new(50.0).unwrap(),
        )
        .unwrap();
        assert!(s.get(0, 0).abs() < 1e-10);
        assert!(s.get(0, 1).abs() < 1e-10);
    }

    #[test]
    fn huber_cov_matches_per_entry_bisection_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let n = 50;
        let p = 3;
        // Heavy-ish draws: ratio of normals scaled down.
        let vals: Vec<f64> = (0..n * p)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(0.2..1.0);
                a / b
            })
            .collect();
        let d = dm(n, p, vals);
        let tau_mean = HuberParam::new(3.0).unwrap();
        let tau_cov = HuberParam::new(2.0).unwrap();
        let s = adaptive_huber_covariance(&d, tau_mean, tau_cov).unwrap();

        let mut means = Vec::new();
        for j in 0..p {
            means.push(bisection_location(&d.col_vec(j), 3.0, 1e-13));
        }
        for j in 0..p {
            for k in j..p {
                let prods: Vec<f64> = (0..n).map(|i| d.get(i, j) * d.get(i, k)).collect();
                let theta = bisection_location(&prods, 2.0, 1e-13);
                let want = theta - means[j] * means[k];
                assert!(
                    (s.get(j, k) - want).abs() < 1e-10,
                    "({j},{k}): {} vs {want}",
                    s.get(j, k)
                );
            }
        }
    }

    #[test]
    fn sample_covariance_basics() {
        let d = dm(2, 2, vec![0.0, 0.0, 2.0, 0.0]);
        let s = sample_covariance(&d).unwrap();
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(1, 1), 0.0);

        let ident = dm(3, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(sample_covariance(&ident).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sample_covariance_pairwise_difference_identity() {
        // (n-1)-divisor covariance equals the average of half squared
        // pairwise differences.
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let n = 5;
        let p = 3;
        let vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(-4.0..4.0)).collect();
        let d = dm(n, p, vals);
        let s = sample_covariance(&d).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        for j in 0..p {
            for k in 0..p {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in a + 1..n {
                        acc += 0.5 * (d.get(a, j) - d.get(b, j)) * (d.get(a, k) - d.get(b, k));
                    }
                }
                assert!((s.get(j, k) - acc / pairs).abs() < 1e-10);
            }
        }
    }
}
