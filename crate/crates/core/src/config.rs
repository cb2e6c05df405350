//! Pipeline configuration: significance level, null-proportion tuning, factor
//! count policy, covariance estimator choice, and robustification parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::huber::HuberParam;
use crate::tuning::{CvPlan, RateSpec};

/// Which covariance estimator drives the loading stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    UType,
    Huber,
    Sample,
}

/// How the number of factors is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorCount {
    /// Use exactly this many factors.
    Fixed(usize),
    /// Eigenvalue-ratio selection up to `k_max`.
    Auto { k_max: usize },
}

/// Label attached to a completed test run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "FARM-H")]
    FarmH,
    #[serde(rename = "FARM-U")]
    FarmU,
    #[serde(rename = "FAM")]
    Fam,
    #[serde(rename = "Naive")]
    Naive,
    #[serde(rename = "Oracle")]
    Oracle,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MethodTag::FarmH => "FARM-H",
            MethodTag::FarmU => "FARM-U",
            MethodTag::Fam => "FAM",
            MethodTag::Naive => "Naive",
            MethodTag::Oracle => "Oracle",
        };
        f.write_str(s)
    }
}

/// How one robustification parameter is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum TauRule {
    /// Unbounded sentinel: quadratic loss everywhere (non-robust baseline).
    Infinite,
    /// `tau = C * rate(n, p)` with the stage's theoretical rate.
    Constant(f64),
    /// Use this value verbatim.
    Explicit(f64),
    /// Select the constant by cross-validation, then `tau = C_hat * rate`.
    CrossValidated,
}

impl TauRule {
    /// Resolves to a concrete parameter given the stage rate; `CrossValidated`
    /// must have been replaced by calibration before this point.
    pub fn resolve(self, rate: f64) -> Result<HuberParam> {
        match self {
            TauRule::Infinite => Ok(HuberParam::INFINITE),
            TauRule::Constant(c) => HuberParam::new(c * rate),
            TauRule::Explicit(t) => HuberParam::new(t),
            TauRule::CrossValidated => Err(Error::InvalidParam(
                "cross-validated rule not yet calibrated".into(),
            )),
        }
    }

    pub fn is_cv(self) -> bool {
        matches!(self, TauRule::CrossValidated)
    }
}

/// Robustification rules for the four estimation stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSet {
    /// Per-coordinate robust means.
    pub mean: TauRule,
    /// Covariance entries (adaptive Huber) or the pairwise clip (U-type).
    pub cov: TauRule,
    /// Robust second moments for residual variances.
    pub variance: TauRule,
    /// Factor regression parameter gamma.
    pub factor: TauRule,
}

impl TauSet {
    pub fn all_cv() -> Self {
        TauSet {
            mean: TauRule::CrossValidated,
            cov: TauRule::CrossValidated,
            variance: TauRule::CrossValidated,
            factor: TauRule::CrossValidated,
        }
    }

    pub fn all_infinite() -> Self {
        TauSet {
            mean: TauRule::Infinite,
            cov: TauRule::Infinite,
            variance: TauRule::Infinite,
            factor: TauRule::Infinite,
        }
    }
}

/// Full configuration of a test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustConfig {
    /// Target FDP level, in (0, 1).
    pub alpha: f64,
    /// Null-proportion estimation parameter, in [0, 1); 0 disables the
    /// correction.
    pub eta: f64,
    /// Factor count policy.
    pub num_factors: FactorCount,
    /// Covariance estimator for the loading stage.
    pub covariance_kind: CovarianceKind,
    /// Robustification rules.
    pub taus: TauSet,
    /// Cross-validation plan, used by any `CrossValidated` rule.
    pub cv: CvPlan,
    /// Solver tolerance (score residual / gradient norm).
    pub tol: f64,
    /// Solver iteration cap.
    pub max_iter: usize,
    /// Relative variance floor: `floor = max(rel * median(diag cov), abs)`.
    pub variance_floor_rel: f64,
    /// Absolute variance floor.
    pub variance_floor_abs: f64,
    /// Cross-sectional floor: residual variances are raised to this fraction
    /// of their own median, damping per-coordinate dips that would otherwise
    /// inflate far-tail statistics. Zero disables it.
    pub variance_floor_frac: f64,
    /// Regress the factor on robust means instead of plain column means.
    pub robust_factor_means: bool,
    /// Shuffle rows (seeded) before sample splitting.
    pub shuffle_split: bool,
    /// Seed for fold assignment, calibration subsets, and the split shuffle.
    pub seed: u64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            alpha: 0.05,
            eta: 0.5,
            num_factors: FactorCount::Auto { k_max: 8 },
            covariance_kind: CovarianceKind::Huber,
            taus: TauSet::all_cv(),
            cv: CvPlan::default(),
            tol: 1e-10,
            max_iter: 200,
            variance_floor_rel: 1e-8,
            variance_floor_abs: 1e-12,
            variance_floor_frac: 0.4,
            robust_factor_means: false,
            shuffle_split: false,
            seed: 0,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::InvalidParam(format!(
                "eta must be in [0,1), got {}",
                self.eta
            )));
        }
        if let FactorCount::Fixed(0) | FactorCount::Auto { k_max: 0 } = self.num_factors {
            return Err(Error::InvalidParam("factor count must be at least 1".into()));
        }
        self.cv.validate()?;
        if self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidParam("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Rate used by the covariance tau for the configured estimator kind.
    pub fn cov_rate(&self) -> RateSpec {
        match self.covariance_kind {
            CovarianceKind::UType => RateSpec::UtypeCov,
            _ => RateSpec::HuberCovEntry,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        RobustConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_alpha_rejected() {
        let mut c = RobustConfig::default();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        c.alpha = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn tau_rule_resolution() {
        assert!(TauRule::Infinite.resolve(3.0).unwrap().is_unbounded());
        assert_eq!(TauRule::Constant(2.0).resolve(3.0).unwrap().value(), 6.0);
        assert_eq!(TauRule::Explicit(1.5).resolve(3.0).unwrap().value(), 1.5);
        assert!(TauRule::CrossValidated.resolve(3.0).is_err());
    }
}
