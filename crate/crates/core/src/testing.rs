//! Factor-adjusted test statistics, p-values, FDP estimation, threshold
//! selection, and the one-sample / two-sample / sample-splitting pipelines.
//!
//! The rejection threshold is the exact infimum of `{z >= 0 : FDP_A(z) <= alpha}`
//! where `FDP_A(z) = 2 p pi0 Phi(-z) / R(z)` and `R(z)` counts statistics with
//! `|T_j| >= z`. Between consecutive order statistics of `|T|`, `R` is
//! constant and `FDP_A` is continuous and decreasing, so the infimum is found
//! by solving on each plateau analytically and taking the first feasible
//! solution. If no `z` with `R(z) >= 1` is feasible the threshold is the
//! infinite sentinel: nothing is rejected and the estimated FDP is zero.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::config::{CovarianceKind, FactorCount, MethodTag, RobustConfig, TauRule};
use crate::covariance;
use crate::eig::symmetric_eig;
use crate::error::{Error, Result, Stage};
use crate::factor::{self, FactorFit};
use crate::huber::HuberParam;
use crate::mat::{DataMatrix, SymMatrix};
use crate::normal::{std_normal_cdf, std_normal_quantile};
use crate::tuning::{self, RateSpec};

/// Outcome of a multiple-testing run.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub method: MethodTag,
    /// Factor-adjusted statistics T_j.
    pub statistics: Vec<f64>,
    /// Two-sided p-values `2 Phi(-|T_j|)`.
    pub pvalues: Vec<f64>,
    /// Estimated null proportion, capped at 1.
    pub pi0_hat: f64,
    /// Rejection threshold; `f64::INFINITY` when no feasible threshold exists.
    pub z_alpha: f64,
    /// Indices with `|T_j| >= z_alpha`, ascending.
    pub rejected: Vec<usize>,
    /// `FDP_A(z_alpha)` when the threshold is finite, else 0.
    pub fdp_estimate: f64,
}

/// Standard normal CDF (re-exported here because every consumer of the
/// testing stage needs it alongside the statistics).
pub fn cdf(z: f64) -> f64 {
    std_normal_cdf(z)
}

/// Factor-adjusted statistics `T_j = sqrt(n / sigma_j) (mu_j - b_j^T f)`.
pub fn test_statistics(mu_hat: &[f64], fit: &FactorFit, n: usize) -> Result<Vec<f64>> {
    let p = mu_hat.len();
    if fit.loadings.rows() != p || fit.residual_variances.len() != p {
        return Err(Error::Shape(format!(
            "means ({p}), loadings ({}), variances ({}) disagree",
            fit.loadings.rows(),
            fit.residual_variances.len()
        )));
    }
    let adjusted = fit.loadings.mul_vec(&fit.factor);
    Ok((0..p)
        .map(|j| {
            let sigma = fit.residual_variances[j];
            (n as f64 / sigma).sqrt() * (mu_hat[j] - adjusted[j])
        })
        .collect())
}

/// Two-sided p-values from statistics.
pub fn pvalues_from_statistics(statistics: &[f64]) -> Vec<f64> {
    statistics.iter().map(|t| 2.0 * std_normal_cdf(-t.abs())).collect()
}

/// Null-proportion estimate: `min(1, #{P_j > eta} / ((1-eta) p))`.
pub fn estimate_pi0(pvalues: &[f64], eta: f64) -> f64 {
    if pvalues.is_empty() {
        return 1.0;
    }
    let count = pvalues.iter().filter(|&&p| p > eta).count() as f64;
    (count / ((1.0 - eta) * pvalues.len() as f64)).min(1.0)
}

fn count_at_or_above(statistics: &[f64], z: f64) -> usize {
    statistics.iter().filter(|t| t.abs() >= z).count()
}

/// Approximate FDP at threshold `z`: `2 p pi0 Phi(-z) / R(z)`, with the
/// convention 0 when `R(z) = 0`. The raw ratio is returned unclamped.
pub fn approx_fdp(z: f64, statistics: &[f64], pi0_hat: f64) -> f64 {
    let r = count_at_or_above(statistics, z);
    if r == 0 {
        return 0.0;
    }
    2.0 * statistics.len() as f64 * pi0_hat * std_normal_cdf(-z) / r as f64
}

/// Exact infimum threshold `z_alpha = inf { z >= 0 : FDP_A(z) <= alpha }`,
/// searched over the region where `R(z) >= 1`; `f64::INFINITY` when no such
/// z is feasible there.
pub fn critical_value(statistics: &[f64], alpha: f64, pi0_hat: f64) -> f64 {
    let p = statistics.len();
    if p == 0 || pi0_hat == 0.0 {
        return 0.0;
    }
    let scale = 2.0 * p as f64 * pi0_hat;

    // Distinct |T| values ascending. Plateau i covers z in (u_{i-1}, u_i]
    // (plateau 0 starts closed at 0) with constant R = #{|T| >= u_i}, on
    // which FDP_A is continuous and decreasing. Walking plateaus upward, an
    // infeasible plateau pushes the next plateau's analytic solution strictly
    // past the shared edge, so the first in-plateau solution is the infimum.
    let mut abs: Vec<f64> = statistics.iter().map(|t| t.abs()).collect();
    abs.sort_by(f64::total_cmp);
    abs.dedup();

    for &upper in &abs {
        let r = count_at_or_above(statistics, upper) as f64;
        // Smallest z with scale * Phi(-z) <= alpha * r.
        let target = alpha * r / scale;
        let z_star = if target >= 0.5 { 0.0 } else { -std_normal_quantile(target) };
        if z_star <= upper {
            return z_star;
        }
    }
    f64::INFINITY
}

/// Indices rejected at threshold `z` (`|T_j| >= z`), ascending.
pub fn rejections(statistics: &[f64], z: f64) -> Vec<usize> {
    statistics
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() >= z)
        .map(|(j, _)| j)
        .collect()
}

/// Assembles the Step 3 outputs from statistics.
pub fn threshold_and_reject(
    statistics: Vec<f64>,
    alpha: f64,
    eta: f64,
    method: MethodTag,
) -> TestResult {
    let pvalues = pvalues_from_statistics(&statistics);
    let pi0_hat = estimate_pi0(&pvalues, eta);
    let z_alpha = critical_value(&statistics, alpha, pi0_hat);
    let (rejected, fdp_estimate) = if z_alpha.is_finite() {
        (rejections(&statistics, z_alpha), approx_fdp(z_alpha, &statistics, pi0_hat))
    } else {
        (Vec::new(), 0.0)
    };
    TestResult { method, statistics, pvalues, pi0_hat, z_alpha, rejected, fdp_estimate }
}

/// Concrete robustification parameters for one pipeline run.
///
/// Cross-validated rules resolve to a shared dimensionless constant applied
/// at each column's own robust scale, so heterogeneous columns are trimmed at
/// comparable relative depths; fixed rules resolve to one shared parameter.
#[derive(Debug, Clone)]
pub struct ResolvedTaus {
    pub mean: TauPer,
    pub cov: CovTau,
    pub variance: TauPer,
    pub gamma: HuberParam,
}

use crate::covariance::CovTau;
use crate::huber::TauPer;

/// Resolves the configured tau rules, running cross-validation for any
/// `CrossValidated` entry. Pure given (data, config).
pub fn resolve_taus(data: &DataMatrix, config: &RobustConfig) -> Result<ResolvedTaus> {
    let n = data.n();
    let p = data.p();
    let needs_cv = config.taus.mean.is_cv()
        || config.taus.cov.is_cv()
        || config.taus.variance.is_cv()
        || config.taus.factor.is_cv();
    let calib = if needs_cv {
        let mut plan = config.cv.clone();
        plan.seed = config.seed.wrapping_add(plan.seed);
        Some(
            tuning::calibrate_config(data, &plan)
                .map_err(|e| Error::at_stage(Stage::Calibrate, e))?,
        )
    } else {
        None
    };

    let mean_rate = RateSpec::Mean.value(n, p);
    let mean = match config.taus.mean {
        TauRule::CrossValidated => {
            let c = calib.as_ref().unwrap().c_mean;
            let taus: Vec<HuberParam> = (0..p)
                .map(|j| {
                    let scale = tuning::robust_scale(&data.col_vec(j));
                    HuberParam::new(c * scale * mean_rate)
                })
                .collect::<Result<_>>()?;
            TauPer::PerColumn(taus)
        }
        rule => TauPer::Shared(rule.resolve(mean_rate)?),
    };
    let cov = match config.taus.cov {
        TauRule::CrossValidated => {
            let c = calib.as_ref().unwrap();
            match config.covariance_kind {
                CovarianceKind::UType => CovTau::Shared(HuberParam::new(c.tau_utype)?),
                _ => CovTau::ScaledPerEntry {
                    mult: c.c_cov_entry * RateSpec::HuberCovEntry.value(n, p),
                },
            }
        }
        rule => CovTau::Shared(rule.resolve(config.cov_rate().value(n, p))?),
    };
    let variance = match config.taus.variance {
        TauRule::CrossValidated => {
            let c = calib.as_ref().unwrap().c_variance;
            let taus: Vec<HuberParam> = (0..p)
                .map(|j| {
                    let squares: Vec<f64> =
                        data.col_vec(j).iter().map(|x| x * x).collect();
                    let scale = tuning::robust_scale(&squares);
                    HuberParam::new(c * scale * mean_rate)
                })
                .collect::<Result<_>>()?;
            TauPer::PerColumn(taus)
        }
        rule => TauPer::Shared(rule.resolve(mean_rate)?),
    };
    let gamma = match config.taus.factor {
        TauRule::CrossValidated => HuberParam::new(calib.as_ref().unwrap().gamma)?,
        rule => rule.resolve(RateSpec::Factor.value(n, p))?,
    };
    Ok(ResolvedTaus { mean, cov, variance, gamma })
}

fn covariance_for(
    data: &DataMatrix,
    kind: CovarianceKind,
    taus: &ResolvedTaus,
) -> Result<SymMatrix> {
    match kind {
        CovarianceKind::UType => {
            let tau = match &taus.cov {
                CovTau::Shared(t) => *t,
                CovTau::ScaledPerEntry { mult } => HuberParam::new(*mult)?,
            };
            covariance::utype_covariance(data, tau)
        }
        CovarianceKind::Huber => {
            // Diagonal entries are second moments of squares; they live at
            // the variance-stage parameter, not the entrywise one.
            covariance::adaptive_huber_covariance_general(
                data,
                &taus.mean,
                &taus.cov,
                &taus.variance,
            )
        }
        CovarianceKind::Sample => covariance::sample_covariance(data),
    }
}

fn variance_floor(cov: &SymMatrix, config: &RobustConfig) -> f64 {
    let mut diag = cov.diag();
    diag.sort_by(f64::total_cmp);
    let median = if diag.is_empty() {
        0.0
    } else if diag.len() % 2 == 1 {
        diag[diag.len() / 2]
    } else {
        0.5 * (diag[diag.len() / 2 - 1] + diag[diag.len() / 2])
    };
    (config.variance_floor_rel * median).max(config.variance_floor_abs)
}

/// Step 1: covariance, eigenstructure, loadings, and the averaged-factor
/// regression. Steps 2's variances are filled in here as well so the result
/// is a complete [`FactorFit`].
pub fn fit_factor_model(
    data: &DataMatrix,
    config: &RobustConfig,
    taus: &ResolvedTaus,
    mu_hat: &[f64],
) -> Result<FactorFit> {
    let cov = covariance_for(data, config.covariance_kind, taus)
        .map_err(|e| Error::at_stage(Stage::Covariance, e))?;
    let decomp = symmetric_eig(&cov).map_err(|e| Error::at_stage(Stage::Eigen, e))?;

    let k = match config.num_factors {
        FactorCount::Fixed(k) => k,
        FactorCount::Auto { k_max } => {
            let k_max = k_max.min(data.p().saturating_sub(1)).max(1);
            factor::select_num_factors(&decomp.eigenvalues, k_max)
                .map_err(|e| Error::at_stage(Stage::Eigen, e))?
        }
    };
    if k + 1 > data.p() {
        return Err(Error::InvalidParam(format!(
            "need p >= K+1 (p={}, K={k})",
            data.p()
        )));
    }

    let loadings = factor::loadings_from_eig(&decomp, k)
        .map_err(|e| Error::at_stage(Stage::Loadings, e))?;
    let regression_means: Vec<f64> = if config.robust_factor_means {
        mu_hat.to_vec()
    } else {
        data.col_means()
    };
    let factor_est = factor::estimate_factors(
        &regression_means,
        &loadings,
        taus.gamma,
        config.tol,
        config.max_iter,
    )
    .map_err(|e| Error::at_stage(Stage::Factors, e))?;

    let floor = variance_floor(&cov, config);
    let mut residual_variances =
        factor::residual_variances_per(data, mu_hat, &loadings, &taus.variance, floor)
            .map_err(|e| Error::at_stage(Stage::Variances, e))?;
    apply_cross_sectional_floor(&mut residual_variances, config.variance_floor_frac);

    let eigenvalues = decomp.eigenvalues[..k].iter().map(|l| l.max(0.0)).collect();
    Ok(FactorFit { k, loadings, factor: factor_est, residual_variances, eigenvalues })
}

/// Raises per-coordinate variances to `frac` of their cross-sectional
/// median; sampling dips below that level are estimation noise that would
/// otherwise blow up the corresponding statistics.
fn apply_cross_sectional_floor(variances: &mut [f64], frac: f64) {
    if frac <= 0.0 || variances.len() < 2 {
        return;
    }
    let mut sorted = variances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let floor = frac * median;
    for v in variances.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
}

fn check_pipeline_preconditions(data: &DataMatrix, config: &RobustConfig) -> Result<()> {
    config.validate()?;
    let min_n = config.cv.folds.max(4);
    if data.n() < min_n {
        return Err(Error::TooFewSamples { context: "pipeline", min: min_n, got: data.n() });
    }
    Ok(())
}

/// The complete one-sample pipeline: robust means, factor fit, statistics,
/// and threshold selection. Deterministic given (data, config).
pub fn farmtest(data: &DataMatrix, config: &RobustConfig) -> Result<TestResult> {
    check_pipeline_preconditions(data, config)?;
    let taus = resolve_taus(data, config)?;
    let mu_hat = covariance::robust_col_means_per(data, &taus.mean)
        .map_err(|e| Error::at_stage(Stage::Means, e))?;
    let fit = fit_factor_model(data, config, &taus, &mu_hat)?;
    let statistics = test_statistics(&mu_hat, &fit, data.n())?;
    let method = method_tag_for(config);
    Ok(threshold_and_reject(statistics, config.alpha, config.eta, method))
}

fn method_tag_for(config: &RobustConfig) -> MethodTag {
    let all_inf = matches!(config.taus.mean, TauRule::Infinite)
        && matches!(config.taus.cov, TauRule::Infinite)
        && matches!(config.taus.variance, TauRule::Infinite)
        && matches!(config.taus.factor, TauRule::Infinite);
    match (config.covariance_kind, all_inf) {
        (CovarianceKind::Sample, true) => MethodTag::Fam,
        (CovarianceKind::UType, _) => MethodTag::FarmU,
        _ => MethodTag::FarmH,
    }
}

/// Per-group estimates feeding the two-sample statistic.
#[derive(Debug, Clone)]
pub struct GroupFit {
    pub mu_hat: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub variances: Vec<f64>,
    pub n: usize,
}

fn group_fit(data: &DataMatrix, config: &RobustConfig) -> Result<GroupFit> {
    let taus = resolve_taus(data, config)?;
    let mu_hat = covariance::robust_col_means_per(data, &taus.mean)
        .map_err(|e| Error::at_stage(Stage::Means, e))?;
    let fit = fit_factor_model(data, config, &taus, &mu_hat)?;
    let adjusted = fit.loadings.mul_vec(&fit.factor);
    Ok(GroupFit { mu_hat, adjusted, variances: fit.residual_variances, n: data.n() })
}

/// Two-sample statistics from per-group fits:
/// `T_j = ((mu_1j - adj_1j) - (mu_2j - adj_2j)) / sqrt(s_1j/n_1 + s_2j/n_2)`.
pub fn two_sample_statistics(g1: &GroupFit, g2: &GroupFit) -> Vec<f64> {
    g1.mu_hat
        .iter()
        .zip(&g1.adjusted)
        .zip(g1.variances.iter())
        .zip(g2.mu_hat.iter().zip(&g2.adjusted).zip(g2.variances.iter()))
        .map(|(((m1, a1), s1), ((m2, a2), s2))| {
            let num = (m1 - a1) - (m2 - a2);
            num / (s1 / g1.n as f64 + s2 / g2.n as f64).sqrt()
        })
        .collect()
}

/// Two-sample pipeline: Steps 1-2 run independently per group, the displayed
/// two-sample statistic combines them, and Step 3 is unchanged.
pub fn farmtest_two_sample(
    data1: &DataMatrix,
    data2: &DataMatrix,
    config: &RobustConfig,
) -> Result<TestResult> {
    if data1.p() != data2.p() {
        return Err(Error::Shape(format!(
            "feature counts differ: {} vs {}",
            data1.p(),
            data2.p()
        )));
    }
    check_pipeline_preconditions(data1, config)?;
    check_pipeline_preconditions(data2, config)?;
    let g1 = group_fit(data1, config)?;
    let g2 = group_fit(data2, config)?;
    let statistics = two_sample_statistics(&g1, &g2);
    let method = method_tag_for(config);
    Ok(threshold_and_reject(statistics, config.alpha, config.eta, method))
}

/// Sample-splitting pipeline: loadings from the first half (optionally after
/// a seeded shuffle), inference on the second half with those loadings; the
/// approximate FDP uses the plain `2 p Phi(-z) / R(z)` form (no null
/// proportion correction).
pub fn farmtest_split(data: &DataMatrix, config: &RobustConfig) -> Result<TestResult> {
    if data.n() < 8 {
        return Err(Error::TooFewSamples { context: "sample splitting", min: 8, got: data.n() });
    }
    check_pipeline_preconditions(data, config)?;

    let working;
    let data = if config.shuffle_split {
        let mut order: Vec<usize> = (0..data.n()).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0x51e0_a8d1_c0ff_ee01);
        order.shuffle(&mut rng);
        working = data.permuted_rows(&order)?;
        &working
    } else {
        data
    };

    let half = data.n().div_ceil(2);
    let first = data.row_slice(0..half)?;
    let second = data.row_slice(half..data.n())?;

    // Loadings from the calibration half.
    let taus1 = resolve_taus(&first, config)?;
    let cov = covariance_for(&first, config.covariance_kind, &taus1)
        .map_err(|e| Error::at_stage(Stage::Covariance, e))?;
    let decomp = symmetric_eig(&cov).map_err(|e| Error::at_stage(Stage::Eigen, e))?;
    let k = match config.num_factors {
        FactorCount::Fixed(k) => k,
        FactorCount::Auto { k_max } => {
            let k_max = k_max.min(data.p().saturating_sub(1)).max(1);
            factor::select_num_factors(&decomp.eigenvalues, k_max)
                .map_err(|e| Error::at_stage(Stage::Eigen, e))?
        }
    };
    let loadings =
        factor::loadings_from_eig(&decomp, k).map_err(|e| Error::at_stage(Stage::Loadings, e))?;

    // Inference on the held-out half.
    let taus2 = resolve_taus(&second, config)?;
    let mu_hat = covariance::robust_col_means_per(&second, &taus2.mean)
        .map_err(|e| Error::at_stage(Stage::Means, e))?;
    let regression_means: Vec<f64> = if config.robust_factor_means {
        mu_hat.clone()
    } else {
        second.col_means()
    };
    let factor_est = factor::estimate_factors(
        &regression_means,
        &loadings,
        taus2.gamma,
        config.tol,
        config.max_iter,
    )
    .map_err(|e| Error::at_stage(Stage::Factors, e))?;
    let floor = variance_floor(&cov, config);
    let mut variances =
        factor::residual_variances_per(&second, &mu_hat, &loadings, &taus2.variance, floor)
            .map_err(|e| Error::at_stage(Stage::Variances, e))?;
    apply_cross_sectional_floor(&mut variances, config.variance_floor_frac);

    let fit = FactorFit {
        k,
        loadings,
        factor: factor_est,
        residual_variances: variances,
        eigenvalues: decomp.eigenvalues[..k].iter().map(|l| l.max(0.0)).collect(),
    };
    let statistics = test_statistics(&mu_hat, &fit, second.n())?;
    // Appendix-style estimate: pi0 fixed at 1 regardless of eta.
    Ok(threshold_and_reject(statistics, config.alpha, 0.0, method_tag_for(config)))
}

/// Naive statistics `sqrt(n) * xbar_j / sd_j` with no factor adjustment.
pub fn naive_statistics(data: &DataMatrix) -> Vec<f64> {
    let n = data.n();
    let means = data.col_means();
    (0..data.p())
        .map(|j| {
            let mut ss = 0.0;
            for i in 0..n {
                let d = data.get(i, j) - means[j];
                ss += d * d;
            }
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            (n as f64).sqrt() * means[j] / sd
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorFit;
    use crate::mat::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fit_with(p: usize, variances: Vec<f64>, loadings: Matrix, factor: Vec<f64>) -> FactorFit {
        assert_eq!(variances.len(), p);
        FactorFit {
            k: loadings.cols(),
            loadings,
            factor,
            residual_variances: variances,
            eigenvalues: vec![1.0],
        }
    }

    #[test]
    fn statistics_formula() {
        // mu - b^T f = 0.1, sigma = 1, n = 100 -> T = 1.
        let mut b = Matrix::zeros(1, 1);
        b.set(0, 0, 1.0);
        let fit = fit_with(1, vec![1.0], b, vec![0.4]);
        let t = test_statistics(&[0.5], &fit, 100).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-12);

        // adjusted mean zero -> statistic zero.
        let mut b = Matrix::zeros(1, 1);
        b.set(0, 0, 2.0);
        let fit = fit_with(1, vec![4.0], b, vec![0.25]);
        let t = test_statistics(&[0.5], &fit, 64).unwrap();
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn statistics_match_direct_arithmetic() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let p = 7;
        let k = 2;
        let n = 50;
        let mut b = Matrix::zeros(p, k);
        for r in 0..p {
            for c in 0..k {
                b.set(r, c, rng.random_range(-1.0..1.0));
            }
        }
        let f: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vars: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
        let fit = fit_with(p, vars.clone(), b.clone(), f.clone());
        let t = test_statistics(&mu, &fit, n).unwrap();
        for j in 0..p {
            let adj: f64 = (0..k).map(|c| b.get(j, c) * f[c]).sum();
            let want = (n as f64 / vars[j]).sqrt() * (mu[j] - adj);
            assert!((t[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pi0_basics() {
        // eta = 0 with all positive p-values counts everything.
        assert_eq!(estimate_pi0(&[0.2, 0.9, 0.51], 0.0), 1.0);
        // cap at 1: all p-values above eta.
        assert_eq!(estimate_pi0(&[1.0, 1.0, 1.0, 1.0], 0.5), 1.0);
    }

    #[test]
    fn pi0_mixed_sample() {
        // 1000 p-values: 200 at zero, 800 uniform; eta = 0.5 recovers ~0.8.
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let mut pv = vec![0.0; 200];
        pv.extend((0..800).map(|_| rng.random_range(0.0..1.0)));
        let got = estimate_pi0(&pv, 0.5);
        assert!((got - 0.8).abs() < 0.06, "{got}");
    }

    #[test]
    fn approx_fdp_examples() {
        // z = 0, pi0 = 1: R(0) = p always, value 2p*0.5/p = 1.
        let stats = vec![0.3, -2.0, 1.0, 0.0];
        assert!((approx_fdp(0.0, &stats, 1.0) - 1.0).abs() < 1e-12);
        // beyond max |T|: convention 0.
        assert_eq!(approx_fdp(10.0, &stats, 1.0), 0.0);
        // {3, -1, 0.5} at z=0.8: R=2.
        let stats = vec![3.0, -1.0, 0.5];
        let want = 2.0 * 3.0 * std_normal_cdf(-0.8) / 2.0;
        assert!((approx_fdp(0.8, &stats, 1.0) - want).abs() < 1e-12);
    }

    /// Dense-grid infimum oracle over the region with R(z) >= 1: grid step
    /// 1e-4 augmented with the order statistics; infinite when nothing is
    /// feasible. Uses a rational-approximation Phi independent of the
    /// series/continued-fraction implementation.
    fn grid_critical_value(statistics: &[f64], alpha: f64, pi0: f64) -> f64 {
        fn phi_approx(z: f64) -> f64 {
            // Abramowitz-Stegun 26.2.17 style approximation, |err| < 7.5e-8.
            let x = z.abs();
            let t = 1.0 / (1.0 + 0.2316419 * x);
            let poly = t
                * (0.319381530
                    + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
            let tail = (-0.5 * x * x).exp() * 0.3989422804014327 * poly;
            if z >= 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
        let p = statistics.len() as f64;
        let mut abs: Vec<f64> = statistics.iter().map(|t| t.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let t_max = *abs.last().unwrap();
        let mut grid: Vec<f64> = Vec::new();
        let mut z = 0.0;
        while z <= t_max {
            grid.push(z);
            z += 1e-4;
        }
        grid.extend(abs.iter().copied());
        grid.sort_by(f64::total_cmp);
        for &z in &grid {
            let r = abs.partition_point(|&a| a < z);
            let r = (abs.len() - r) as f64;
            if r == 0.0 {
                continue;
            }
            if 2.0 * p * pi0 * phi_approx(-z) / r <= alpha {
                return z;
            }
        }
        f64::INFINITY
    }

    #[test]
    fn critical_value_single_statistic() {
        // T = 10, alpha = 0.05, pi0 = 1: solve 2 Phi(-z) = 0.05 on the R=1
        // plateau.
        let z = critical_value(&[10.0], 0.05, 1.0);
        assert!((z - 1.959963984540054).abs() < 1e-9, "{z}");
    }

    #[test]
    fn critical_value_all_zero_statistics() {
        // FDP_A(0) = pi0 = 1 > alpha and every z > 0 has R = 0: infeasible in
        // the R >= 1 region, so the sentinel is returned; the grid oracle
        // agrees.
        let stats = vec![0.0; 6];
        let z = critical_value(&stats, 0.05, 1.0);
        assert!(z.is_infinite());
        assert!(grid_critical_value(&stats, 0.05, 1.0).is_infinite());
    }

    #[test]
    fn critical_value_plateau_at_zero() {
        // pi0 = 0.5 <= alpha = 0.6: already feasible at z = 0.
        let stats = vec![0.5, 1.0, -0.25];
        assert_eq!(critical_value(&stats, 0.6, 0.5), 0.0);
    }

    #[test]
    fn critical_value_matches_grid_oracle_randomized() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for trial in 0..300 {
            let p = rng.random_range(1..12);
            let stats: Vec<f64> = (0..p).map(|_| rng.random_range(-4.0..4.0)).collect();
            let alpha = rng.random_range(0.01..0.5);
            let pi0 = rng.random_range(0.2..1.0);
            let exact = critical_value(&stats, alpha, pi0);
            let grid = grid_critical_value(&stats, alpha, pi0);
            if exact.is_infinite() || grid.is_infinite() {
                assert_eq!(
                    exact.is_infinite(),
                    grid.is_infinite(),
                    "trial {trial}: {exact} vs {grid} ({stats:?}, alpha={alpha}, pi0={pi0})"
                );
            } else {
                assert!(
                    (exact - grid).abs() <= 2e-4,
                    "trial {trial}: {exact} vs {grid} ({stats:?}, alpha={alpha}, pi0={pi0})"
                );
            }
        }
    }

    #[test]
    fn threshold_correctness_properties() {
        let mut rng = ChaCha20Rng::seed_from_u64(123);
        for _ in 0..200 {
            let p = rng.random_range(2..30);
            let stats: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
            let alpha = rng.random_range(0.01..0.4);
            let z = critical_value(&stats, alpha, 1.0);
            if z.is_finite() {
                assert!(approx_fdp(z, &stats, 1.0) <= alpha + 1e-9);
                // Plateau points strictly below are infeasible.
                for frac in [0.25, 0.5, 0.9] {
                    let z_before = z * frac;
                    if z_before < z {
                        assert!(approx_fdp(z_before, &stats, 1.0) > alpha - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rejection_monotone_in_alpha() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let stats: Vec<f64> = (0..40).map(|_| rng.random_range(-4.0..4.0)).collect();
        let r1 = {
            let z = critical_value(&stats, 0.05, 1.0);
            rejections(&stats, z)
        };
        let r2 = {
            let z = critical_value(&stats, 0.2, 1.0);
            rejections(&stats, z)
        };
        for j in &r1 {
            assert!(r2.contains(j));
        }
    }

    #[test]
    fn pvalue_validity() {
        let stats = vec![0.0, 1.0, -3.0, 8.0];
        let pv = pvalues_from_statistics(&stats);
        assert_eq!(pv[0], 1.0);
        for (t, p) in stats.iter().zip(&pv) {
            assert!(*p > 0.0 && *p <= 1.0);
            assert_eq!(*p == 1.0, *t == 0.0);
        }
    }

    #[test]
    fn eta_zero_reduces_to_plain_threshold() {
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        let stats: Vec<f64> = (0..60).map(|_| rng.random_range(-4.0..4.0)).collect();
        let res_eta0 = threshold_and_reject(stats.clone(), 0.05, 0.0, MethodTag::Naive);
        assert_eq!(res_eta0.pi0_hat, 1.0);
        let plain = critical_value(&stats, 0.05, 1.0);
        assert_eq!(res_eta0.z_alpha, plain);
    }

    #[test]
    fn naive_statistics_standardize() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let n = 30;
        let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let data = DataMatrix::new(n, 1, col).unwrap();
        let t = naive_statistics(&data);
        assert!((t[0] - (n as f64).sqrt() * mean / var.sqrt()).abs() < 1e-12);
    }
}
