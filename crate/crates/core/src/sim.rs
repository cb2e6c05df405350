//! Seeded scenario generators, oracle quantities, and the experiment runner.
//!
//! Three factor-model scenarios with four error laws generate benchmark data
//! with known ground truth. The runner replays a scenario across independent
//! seeded replications, runs each requested method, and scores estimated FDP
//! against the oracle FDP (relative absolute error), power at a fixed p-value
//! threshold, and empirical FDP at the target level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CovarianceKind, FactorCount, MethodTag, RobustConfig, TauSet};
use crate::error::{Error, Result, Stage};
use crate::huber::HuberParam;
use crate::mat::{DataMatrix, Matrix, SymMatrix};
use crate::normal::std_normal_quantile;
use crate::testing::{self, TestResult};

/// Data-generating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// IID uniform loadings on (-2, 2), standard normal factors.
    M1,
    /// Correlated factors and non-centered Gaussian loadings (synthetic
    /// calibration; see `SYNTHETIC_FACTOR_EIGENVALUES`).
    M2Synthetic,
    /// Factors from a stationary VAR(1) recursion.
    M3Var1,
}

/// Idiosyncratic error law; every law is centered with per-coordinate
/// variance 3 (the multivariate t is rescaled accordingly).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Normal,
    T3,
    Gamma,
    Lognormal,
}

/// Synthetic stand-in for the correlated-factor covariance of `M2Synthetic`:
/// eigenvalues of the factor covariance before rotation.
pub const SYNTHETIC_FACTOR_EIGENVALUES: [f64; 3] = [1.5, 1.0, 0.6];
/// Loading mean and isotropic loading variance for `M2Synthetic`.
pub const SYNTHETIC_LOADING_MEAN: f64 = 0.3;
pub const SYNTHETIC_LOADING_VAR: f64 = 0.2;

/// One simulated dataset description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: Model,
    pub error: ErrorLaw,
    pub n: usize,
    pub p: usize,
    /// Number of non-null coordinates (the first `p1` means are `signal`).
    pub p1: usize,
    pub signal: f64,
    /// Number of latent factors.
    pub k: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.p1 > self.p {
            return Err(Error::InvalidParam(format!(
                "p1 = {} exceeds p = {}",
                self.p1, self.p
            )));
        }
        if self.n < 2 || self.p == 0 || self.k == 0 {
            return Err(Error::InvalidParam("scenario needs n >= 2, p >= 1, k >= 1".into()));
        }
        if !self.signal.is_finite() {
            return Err(Error::NonFinite { context: "scenario signal" });
        }
        Ok(())
    }
}

/// Ground truth paired with a generated dataset; the data reconstructs
/// exactly as `1 mu^T + factors B^T + errors`.
#[derive(Debug, Clone)]
pub struct ScenarioTruth {
    pub mu: Vec<f64>,
    pub loadings: Matrix,
    pub factors: Matrix,
    pub errors: Matrix,
    pub null_set: Vec<usize>,
    /// True per-coordinate error variances.
    pub sigma_eps_diag: Vec<f64>,
    /// Ridge added to the error covariance to restore positive definiteness
    /// (zero when the draw was already comfortably PD).
    pub psd_ridge: f64,
}

/// SplitMix64 step; used to derive per-replication seeds from a master seed.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `rep` derived from a master seed.
pub fn rep_seed(master: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(master) ^ rep)
}

/// VAR(1) transition matrix: 0.5 on the diagonal, `0.4^|j-k|` off it,
/// rescaled onto spectral radius `0.95` when the raw matrix is explosive
/// (for k = 3 the raw spectral radius is about 1.15).
fn var1_transition(k: usize) -> Result<Matrix> {
    let mut pi = Matrix::zeros(k, k);
    for j in 0..k {
        for l in 0..k {
            let v = if j == l { 0.5 } else { 0.4f64.powi((j as i32 - l as i32).abs()) };
            pi.set(j, l, v);
        }
    }
    // Symmetric, so the spectral radius is the largest |eigenvalue|.
    let sym = SymMatrix::from_upper_fn(k, |a, b| pi.get(a, b));
    let eig = crate::eig::symmetric_eig(&sym)?;
    let radius = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, l| m.max(l.abs()));
    if radius >= 1.0 {
        let scale = 0.95 / radius;
        for j in 0..k {
            for l in 0..k {
                pi.set(j, l, pi.get(j, l) * scale);
            }
        }
    }
    Ok(pi)
}

/// Guard used by custom transitions: stationarity requires spectral radius
/// strictly below one.
pub fn check_var1_stationary(pi: &Matrix) -> Result<()> {
    let k = pi.rows();
    let sym = SymMatrix::from_upper_fn(k, |a, b| 0.5 * (pi.get(a, b) + pi.get(b, a)));
    let eig = crate::eig::symmetric_eig(&sym)?;
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if radius >= 1.0 {
        return Err(Error::InvalidParam(format!(
            "VAR(1) transition has spectral radius {radius:.4} >= 1"
        )));
    }
    Ok(())
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Error covariance: diagonal 3, upper-triangle off-diagonals drawn as
/// `0.3 * Bernoulli(0.05)` and mirrored. If the smallest eigenvalue falls
/// below 0.1 a ridge restores it to 0.1; the ridge size is reported.
fn error_covariance(p: usize, rng: &mut ChaCha20Rng) -> Result<(SymMatrix, f64)> {
    let mut sigma = SymMatrix::zeros(p);
    for j in 0..p {
        sigma.set_sym(j, j, 3.0);
    }
    for j in 0..p {
        for k in (j + 1)..p {
            if rng.random_range(0.0..1.0) < 0.05 {
                sigma.set_sym(j, k, 0.3);
            }
        }
    }
    let eig = crate::eig::symmetric_eig(&sigma)?;
    let min_eig = *eig.eigenvalues.last().unwrap();
    let mut ridge = 0.0;
    if min_eig < 0.1 {
        ridge = 0.1 - min_eig;
        for j in 0..p {
            sigma.set_sym(j, j, sigma.get(j, j) + ridge);
        }
    }
    Ok((sigma, ridge))
}

/// Rotation mixing the synthetic factor eigenvalues into a dense covariance:
/// fixed Givens rotations, independent of any seed.
fn synthetic_factor_chol(k: usize) -> Result<Matrix> {
    let mut cov = Matrix::zeros(k, k);
    for i in 0..k {
        let ev = SYNTHETIC_FACTOR_EIGENVALUES[i % SYNTHETIC_FACTOR_EIGENVALUES.len()];
        cov.set(i, i, ev);
    }
    // Rotate by fixed angles in successive planes.
    let angles = [0.6f64, 1.1, 0.3];
    let mut rot = Matrix::identity(k);
    let mut idx = 0;
    for a in 0..k {
        for b in (a + 1)..k {
            let th = angles[idx % angles.len()];
            idx += 1;
            let (s, c) = th.sin_cos();
            let mut g = Matrix::identity(k);
            g.set(a, a, c);
            g.set(b, b, c);
            g.set(a, b, -s);
            g.set(b, a, s);
            // rot = g * rot
            let mut next = Matrix::zeros(k, k);
            for r in 0..k {
                for cc in 0..k {
                    let mut v = 0.0;
                    for q in 0..k {
                        v += g.get(r, q) * rot.get(q, cc);
                    }
                    next.set(r, cc, v);
                }
            }
            rot = next;
        }
    }
    // cov <- rot * diag * rot^T, then its Cholesky factor.
    let mut full = SymMatrix::zeros(k);
    for r in 0..k {
        for cc in r..k {
            let mut v = 0.0;
            for q in 0..k {
                v += rot.get(r, q) * cov.get(q, q) * rot.get(cc, q);
            }
            full.set_sym(r, cc, v);
        }
    }
    full.cholesky()
}

/// Generates a dataset and its ground truth; bitwise reproducible per seed.
///
/// Draw order is fixed: loadings, error covariance, factors, then errors.
pub fn generate(scenario: &Scenario) -> Result<(DataMatrix, ScenarioTruth)> {
    scenario.validate()?;
    let n = scenario.n;
    let p = scenario.p;
    let k = scenario.k;
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);

    let mut mu = vec![0.0; p];
    for m in mu.iter_mut().take(scenario.p1) {
        *m = scenario.signal;
    }
    let null_set: Vec<usize> = (scenario.p1..p).collect();

    // Loadings.
    let mut loadings = Matrix::zeros(p, k);
    match scenario.model {
        Model::M1 | Model::M3Var1 => {
            for r in 0..p {
                for c in 0..k {
                    loadings.set(r, c, rng.random_range(-2.0..2.0));
                }
            }
        }
        Model::M2Synthetic => {
            let sd = SYNTHETIC_LOADING_VAR.sqrt();
            for r in 0..p {
                for c in 0..k {
                    loadings.set(r, c, SYNTHETIC_LOADING_MEAN + sd * standard_normal(&mut rng));
                }
            }
        }
    }

    // Error covariance (multivariate laws only).
    let needs_sigma = matches!(scenario.error, ErrorLaw::Normal | ErrorLaw::T3);
    let (chol, psd_ridge, sigma_diag_base) = if needs_sigma {
        let (sigma, ridge) = error_covariance(p, &mut rng).map_err(|e| Error::at_stage(Stage::Generate, e))?;
        let diag = sigma.diag();
        let l = sigma.cholesky().map_err(|e| Error::at_stage(Stage::Generate, e))?;
        (Some(l), ridge, diag)
    } else {
        (None, 0.0, vec![3.0; p])
    };

    // Factors.
    let mut factors = Matrix::zeros(n, k);
    match scenario.model {
        Model::M1 => {
            for i in 0..n {
                for c in 0..k {
                    factors.set(i, c, standard_normal(&mut rng));
                }
            }
        }
        Model::M2Synthetic => {
            let l = synthetic_factor_chol(k).map_err(|e| Error::at_stage(Stage::Generate, e))?;
            let mut z = vec![0.0; k];
            for i in 0..n {
                for zc in z.iter_mut() {
                    *zc = standard_normal(&mut rng);
                }
                for c in 0..k {
                    let mut v = 0.0;
                    for q in 0..=c {
                        v += l.get(c, q) * z[q];
                    }
                    factors.set(i, c, v);
                }
            }
        }
        Model::M3Var1 => {
            let pi = var1_transition(k).map_err(|e| Error::at_stage(Stage::Generate, e))?;
            check_var1_stationary(&pi).map_err(|e| Error::at_stage(Stage::Generate, e))?;
            let mut prev = vec![0.0; k];
            for i in 0..n {
                let mut cur = vec![0.0; k];
                for (c, cv) in cur.iter_mut().enumerate() {
                    let mut v = standard_normal(&mut rng);
                    for q in 0..k {
                        v += pi.get(c, q) * prev[q];
                    }
                    *cv = v;
                }
                for c in 0..k {
                    factors.set(i, c, cur[c]);
                }
                prev = cur;
            }
        }
    }

    // Errors, row by row.
    let mut errors = Matrix::zeros(n, p);
    let sigma_eps_diag = sigma_diag_base.clone();
    match scenario.error {
        ErrorLaw::Normal => {
            let l = chol.as_ref().unwrap();
            let mut z = vec![0.0; p];
            for i in 0..n {
                for zc in z.iter_mut() {
                    *zc = standard_normal(&mut rng);
                }
                for j in 0..p {
                    let mut v = 0.0;
                    for q in 0..=j {
                        v += l.get(j, q) * z[q];
                    }
                    errors.set(i, j, v);
                }
            }
        }
        ErrorLaw::T3 => {
            // Gaussian divided per row by sqrt(chi^2_3 / 3), then rescaled by
            // 1/sqrt(3) so the coordinate variance matches the target matrix
            // (the raw construction has variance 3x its scatter).
            let l = chol.as_ref().unwrap();
            let chi = ChiSquared::new(3.0).expect("valid dof");
            let rescale = 1.0 / 3.0f64.sqrt();
            let mut z = vec![0.0; p];
            for i in 0..n {
                for zc in z.iter_mut() {
                    *zc = standard_normal(&mut rng);
                }
                let chi_draw: f64 = chi.sample(&mut rng);
                let denom = (chi_draw / 3.0).sqrt();
                for j in 0..p {
                    let mut v = 0.0;
                    for q in 0..=j {
                        v += l.get(j, q) * z[q];
                    }
                    errors.set(i, j, v * rescale / denom);
                }
            }
        }
        ErrorLaw::Gamma => {
            // Shape 3, scale 1, centered: mean 0, variance 3.
            let gamma = Gamma::new(3.0, 1.0).expect("valid shape");
            for i in 0..n {
                for j in 0..p {
                    errors.set(i, j, gamma.sample(&mut rng) - 3.0);
                }
            }
        }
        ErrorLaw::Lognormal => {
            // a (exp(1 + 1.2 Z) - b) with mean 0, variance 3:
            // b = e^{1.72}, a = sqrt(3 / (e^{3.44} (e^{1.44} - 1))).
            let b = (1.72f64).exp();
            let a = (3.0 / ((3.44f64).exp() * ((1.44f64).exp() - 1.0))).sqrt();
            for i in 0..n {
                for j in 0..p {
                    let z = standard_normal(&mut rng);
                    errors.set(i, j, a * ((1.0 + 1.2 * z).exp() - b));
                }
            }
        }
    }

    // Assemble X = 1 mu^T + F B^T + E.
    let mut values = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            let mut v = mu[j] + errors.get(i, j);
            for c in 0..k {
                v += factors.get(i, c) * loadings.get(j, c);
            }
            values.push(v);
        }
    }
    let data = DataMatrix::new(n, p, values)?;
    Ok((
        data,
        ScenarioTruth {
            mu,
            loadings,
            factors,
            errors,
            null_set,
            sigma_eps_diag,
            psd_ridge,
        },
    ))
}

/// Oracle statistics `sqrt(n / sigma_jj) (mu_hat_j - b_j^T fbar)` with true
/// loadings, true averaged factor, and true residual variances; only the
/// robust means come from data.
pub fn oracle_statistics(
    data: &DataMatrix,
    truth: &ScenarioTruth,
    tau_mean: HuberParam,
) -> Result<Vec<f64>> {
    let n = data.n();
    let p = data.p();
    let fbar: Vec<f64> = (0..truth.factors.cols())
        .map(|c| (0..n).map(|i| truth.factors.get(i, c)).sum::<f64>() / n as f64)
        .collect();
    let adjusted = truth.loadings.mul_vec(&fbar);
    let mu_hat = crate::covariance::robust_col_means(data, tau_mean)?;
    Ok((0..p)
        .map(|j| (n as f64 / truth.sigma_eps_diag[j]).sqrt() * (mu_hat[j] - adjusted[j]))
        .collect())
}

/// Oracle FDP at p-value threshold `t`:
/// `#(null rejections) / max(1, #rejections)`.
pub fn oracle_fdp(threshold_t: f64, oracle_pvalues: &[f64], null_set: &[usize]) -> f64 {
    let total = oracle_pvalues.iter().filter(|&&p| p <= threshold_t).count();
    let false_pos = null_set
        .iter()
        .filter(|&&j| oracle_pvalues[j] <= threshold_t)
        .count();
    false_pos as f64 / (total.max(1)) as f64
}

/// Per-replication scores for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepScore {
    /// Estimated FDP at the p-value threshold.
    pub estimated_fdp_t: f64,
    /// Relative absolute error against the oracle FDP; absent when the
    /// oracle FDP is zero.
    pub rae: Option<f64>,
    /// Fraction of the non-null coordinates rejected at the threshold.
    pub power_t: f64,
    /// Realized false discovery proportion among rejections at the
    /// threshold.
    pub fdp_t: f64,
    /// Realized false discovery proportion of the level-alpha rejection set.
    pub empirical_fdp_alpha: f64,
    /// Size of the level-alpha rejection set.
    pub rejections_alpha: usize,
}

/// Aggregates across replications for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodTag,
    pub median_rae: Option<f64>,
    /// Replications skipped in the RAE median because the oracle FDP was 0.
    pub rae_skipped: usize,
    pub mean_power_t: f64,
    pub mean_empirical_fdp_alpha: f64,
    pub mean_estimated_fdp_t: f64,
    pub per_rep: Vec<RepScore>,
}

/// Full experiment output; a pure function of its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub methods: Vec<MethodTag>,
    pub reps: usize,
    pub alpha: f64,
    pub threshold_t: f64,
    pub eta: f64,
    pub master_seed: u64,
    /// Oracle FDP at the threshold, one entry per replication.
    pub oracle_fdp_t: Vec<f64>,
    /// Largest PSD ridge added to any replication's error covariance.
    pub max_psd_ridge: f64,
    pub summaries: Vec<MethodSummary>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Builds the per-method pipeline configuration used by the runner.
pub fn method_config(method: MethodTag, alpha: f64, eta: f64, seed: u64, k: usize) -> RobustConfig {
    let mut config = RobustConfig {
        alpha,
        eta,
        num_factors: FactorCount::Fixed(k),
        seed,
        ..RobustConfig::default()
    };
    match method {
        MethodTag::FarmH => {
            config.covariance_kind = CovarianceKind::Huber;
            config.taus = TauSet::all_cv();
        }
        MethodTag::FarmU => {
            config.covariance_kind = CovarianceKind::UType;
            config.taus = TauSet::all_cv();
        }
        MethodTag::Fam => {
            config.covariance_kind = CovarianceKind::Sample;
            config.taus = TauSet::all_infinite();
        }
        MethodTag::Naive | MethodTag::Oracle => {}
    }
    config
}

fn run_method(
    method: MethodTag,
    data: &DataMatrix,
    truth: &ScenarioTruth,
    alpha: f64,
    eta: f64,
    seed: u64,
    k: usize,
    oracle_tau: HuberParam,
) -> Result<TestResult> {
    match method {
        MethodTag::Naive => {
            let stats = testing::naive_statistics(data);
            Ok(testing::threshold_and_reject(stats, alpha, eta, MethodTag::Naive))
        }
        MethodTag::Oracle => {
            let stats = oracle_statistics(data, truth, oracle_tau)?;
            Ok(testing::threshold_and_reject(stats, alpha, eta, MethodTag::Oracle))
        }
        _ => {
            let config = method_config(method, alpha, eta, seed, k);
            testing::farmtest(data, &config)
        }
    }
}

fn score_method(
    result: &TestResult,
    truth: &ScenarioTruth,
    threshold_t: f64,
    z_t: f64,
    oracle_fdp_value: f64,
    p1: usize,
) -> RepScore {
    let stats = &result.statistics;
    let estimated_fdp_t = approx_fdp_at(z_t, stats, result.pi0_hat);
    let rae = if oracle_fdp_value > 0.0 {
        Some((estimated_fdp_t - oracle_fdp_value).abs() / oracle_fdp_value)
    } else {
        None
    };

    let rejected_t: Vec<usize> = testing::rejections(stats, z_t);
    let correct = rejected_t.iter().filter(|&&j| j < p1).count();
    let false_t = rejected_t.len() - correct;
    let power_t = if p1 > 0 { correct as f64 / p1 as f64 } else { 0.0 };
    let fdp_t = if rejected_t.is_empty() {
        0.0
    } else {
        false_t as f64 / rejected_t.len() as f64
    };

    let false_alpha = result.rejected.iter().filter(|&&j| j >= p1).count();
    let empirical_fdp_alpha = if result.rejected.is_empty() {
        0.0
    } else {
        false_alpha as f64 / result.rejected.len() as f64
    };

    let _ = truth;
    let _ = threshold_t;
    RepScore {
        estimated_fdp_t,
        rae,
        power_t,
        fdp_t,
        empirical_fdp_alpha,
        rejections_alpha: result.rejected.len(),
    }
}

fn approx_fdp_at(z: f64, statistics: &[f64], pi0: f64) -> f64 {
    testing::approx_fdp(z, statistics, pi0)
}

/// Runs `reps` independent replications of a scenario for each method.
///
/// Per replication: generate data, compute oracle statistics and the oracle
/// FDP at the p-value threshold `t`, then run and score every method. The
/// level-alpha rejection set uses the full threshold machinery; power and
/// FDP-estimation accuracy are scored at `z_t = -quantile(t/2)`.
pub fn run_experiment(
    scenario: &Scenario,
    methods: &[MethodTag],
    reps: usize,
    alpha: f64,
    threshold_t: f64,
    eta: f64,
) -> Result<ExperimentReport> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::InvalidParam("need at least one replication".into()));
    }
    if !(threshold_t > 0.0 && threshold_t < 1.0) {
        return Err(Error::InvalidParam(format!(
            "p-value threshold must be in (0,1), got {threshold_t}"
        )));
    }
    let z_t = -std_normal_quantile(threshold_t / 2.0);

    struct RepOutcome {
        oracle_fdp_t: f64,
        ridge: f64,
        scores: Vec<RepScore>,
    }

    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let seed = rep_seed(scenario.seed, rep as u64);
            let rep_scenario = Scenario { seed, ..scenario.clone() };
            let (data, truth) = generate(&rep_scenario).map_err(|e| Error::at_rep(rep, e))?;

            // Oracle tau from the shared mean calibration of this dataset.
            let plan = crate::tuning::CvPlan { seed, ..crate::tuning::CvPlan::default() };
            let calib = crate::tuning::calibrate_config(&data, &plan)
                .map_err(|e| Error::at_rep(rep, Error::at_stage(Stage::Calibrate, e)))?;
            let oracle_tau =
                HuberParam::new(calib.tau_mean).map_err(|e| Error::at_rep(rep, e))?;

            let oracle_stats = oracle_statistics(&data, &truth, oracle_tau)
                .map_err(|e| Error::at_rep(rep, e))?;
            let oracle_pvalues = testing::pvalues_from_statistics(&oracle_stats);
            let fdp_orc = oracle_fdp(threshold_t, &oracle_pvalues, &truth.null_set);

            let mut scores = Vec::with_capacity(methods.len());
            for &method in methods {
                let result = run_method(
                    method,
                    &data,
                    &truth,
                    alpha,
                    eta,
                    seed,
                    scenario.k,
                    oracle_tau,
                )
                .map_err(|e| Error::at_rep(rep, e))?;
                scores.push(score_method(
                    &result,
                    &truth,
                    threshold_t,
                    z_t,
                    fdp_orc,
                    scenario.p1,
                ));
            }
            Ok(RepOutcome { oracle_fdp_t: fdp_orc, ridge: truth.psd_ridge, scores })
        })
        .collect::<Result<_>>()?;

    let oracle_fdp_t: Vec<f64> = outcomes.iter().map(|o| o.oracle_fdp_t).collect();
    let max_psd_ridge = outcomes.iter().fold(0.0f64, |m, o| m.max(o.ridge));

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let per_rep: Vec<RepScore> =
                outcomes.iter().map(|o| o.scores[mi].clone()).collect();
            let mut raes: Vec<f64> = per_rep.iter().filter_map(|s| s.rae).collect();
            let rae_skipped = per_rep.len() - raes.len();
            let median_rae = median(&mut raes);
            let mean = |f: fn(&RepScore) -> f64| {
                per_rep.iter().map(f).sum::<f64>() / per_rep.len() as f64
            };
            MethodSummary {
                method,
                median_rae,
                rae_skipped,
                mean_power_t: mean(|s| s.power_t),
                mean_empirical_fdp_alpha: mean(|s| s.empirical_fdp_alpha),
                mean_estimated_fdp_t: mean(|s| s.estimated_fdp_t),
                per_rep,
            }
        })
        .collect();

    Ok(ExperimentReport {
        scenario: scenario.clone(),
        methods: methods.to_vec(),
        reps,
        alpha,
        threshold_t,
        eta,
        master_seed: scenario.seed,
        oracle_fdp_t,
        max_psd_ridge,
        summaries,
    })
}
