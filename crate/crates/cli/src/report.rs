//! Versioned JSON report documents.

use serde::{Deserialize, Serialize};

use farmtest::config::RobustConfig;
use farmtest::sim::ExperimentReport;
use farmtest::testing::TestResult;
use farmtest::tuning::{CvPlan, TauCalibration};

pub const TEST_SCHEMA: &str = "farmtest.test_result/1";
pub const EXPERIMENT_SCHEMA: &str = "farmtest.experiment_report/1";
pub const CALIBRATION_SCHEMA: &str = "farmtest.calibration/1";

/// One-sample / two-sample test run output.
#[derive(Debug, Serialize)]
pub struct TestReport {
    pub schema: &'static str,
    pub version: &'static str,
    pub method: String,
    pub n_features: usize,
    pub alpha: f64,
    pub eta: f64,
    pub pi0_hat: f64,
    /// Rejection threshold; null when no finite threshold exists.
    pub z_alpha: Option<f64>,
    pub fdp_estimate: f64,
    pub rejected_indices: Vec<usize>,
    pub rejected_names: Vec<String>,
    pub statistics: Vec<f64>,
    pub pvalues: Vec<f64>,
}

impl TestReport {
    pub fn new(result: &TestResult, names: &[String], config: &RobustConfig) -> Self {
        TestReport {
            schema: TEST_SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            method: result.method.to_string(),
            n_features: result.statistics.len(),
            alpha: config.alpha,
            eta: config.eta,
            pi0_hat: result.pi0_hat,
            z_alpha: result.z_alpha.is_finite().then_some(result.z_alpha),
            fdp_estimate: result.fdp_estimate,
            rejected_indices: result.rejected.clone(),
            rejected_names: result.rejected.iter().map(|&j| names[j].clone()).collect(),
            statistics: result.statistics.clone(),
            pvalues: result.pvalues.clone(),
        }
    }
}

/// Experiment report with the schema/version envelope.
#[derive(Debug, Serialize)]
pub struct ExperimentReportDoc {
    pub schema: &'static str,
    pub version: &'static str,
    #[serde(flatten)]
    pub report: ExperimentReport,
}

impl ExperimentReportDoc {
    pub fn new(report: ExperimentReport) -> Self {
        ExperimentReportDoc {
            schema: EXPERIMENT_SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            report,
        }
    }
}

/// Calibration fragment consumable by `--config`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema: String,
    pub version: String,
    pub folds: usize,
    pub grid: Vec<f64>,
    pub subset_size: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub calibration: TauCalibration,
}

impl CalibrationReport {
    pub fn new(calibration: TauCalibration, plan: &CvPlan) -> Self {
        CalibrationReport {
            schema: CALIBRATION_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            folds: plan.folds,
            grid: plan.grid.clone(),
            subset_size: plan.subset_size,
            seed: plan.seed,
            calibration,
        }
    }
}
