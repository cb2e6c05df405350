//! Command-line interface: robust factor-adjusted multiple testing over CSV
//! files, seeded simulation experiments, and robustification-constant
//! calibration.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use farmtest::config::{CovarianceKind, FactorCount, MethodTag, RobustConfig, TauRule, TauSet};
use farmtest::sim::{run_experiment, ErrorLaw, Model, Scenario};
use farmtest::testing::{self, TestResult};
use farmtest::tuning::{calibrate_config, CvPlan, TauCalibration};

mod io;
mod report;

use io::{read_csv_matrix, CliError};
use report::{CalibrationReport, TestReport};

#[derive(Parser)]
#[command(name = "farmtest", version, about = "Factor-adjusted robust multiple testing")]
struct Cli {
    /// Worker threads (default: all cores; FARMTEST_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-sample simultaneous mean testing on a CSV matrix.
    Test(TestArgs),
    /// Two-sample testing: equality of means across two CSV matrices.
    Test2(Test2Args),
    /// Seeded simulation experiment with oracle scoring.
    Simulate(SimulateArgs),
    /// Cross-validate robustification constants for a CSV matrix.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CovArg {
    Utype,
    Huber,
    Sample,
}

impl From<CovArg> for CovarianceKind {
    fn from(c: CovArg) -> Self {
        match c {
            CovArg::Utype => CovarianceKind::UType,
            CovArg::Huber => CovarianceKind::Huber,
            CovArg::Sample => CovarianceKind::Sample,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Args)]
struct CommonTestArgs {
    /// Target false discovery proportion level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Null-proportion estimation parameter (0 disables the correction).
    #[arg(long, default_value_t = 0.5)]
    eta: f64,

    /// Number of latent factors; omit to select by the eigenvalue-ratio rule.
    #[arg(long, short = 'k')]
    factors: Option<usize>,

    /// Upper bound for eigenvalue-ratio factor selection.
    #[arg(long, default_value_t = 8)]
    k_max: usize,

    /// Covariance estimator behind the loading stage.
    #[arg(long, value_enum, default_value_t = CovArg::Huber)]
    cov: CovArg,

    /// Non-robust baseline: quadratic loss everywhere.
    #[arg(long)]
    tau_inf: bool,

    /// Explicit robustification parameters (override cross-validation).
    #[arg(long)]
    tau_mean: Option<f64>,
    #[arg(long)]
    tau_cov: Option<f64>,
    #[arg(long)]
    tau_var: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,

    /// Calibration fragment (JSON from `farmtest calibrate`) supplying
    /// explicit parameters.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Regress the averaged factor on robust means instead of column means.
    #[arg(long)]
    robust_factor_means: bool,

    /// Seed for fold assignment and calibration subsets.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Header row handling for the CSV input.
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV, rows = observations, columns = features.
    csv: PathBuf,

    #[command(flatten)]
    common: CommonTestArgs,

    /// Split the sample: loadings from the first half, inference on the rest.
    #[arg(long)]
    split: bool,

    /// Shuffle rows (seeded) before splitting.
    #[arg(long)]
    shuffle_split: bool,

    /// Also write the rejected feature names/indices as CSV.
    #[arg(long)]
    rejected_csv: Option<PathBuf>,
}

#[derive(Args)]
struct Test2Args {
    /// First group CSV.
    csv1: PathBuf,
    /// Second group CSV (same columns).
    csv2: PathBuf,

    #[command(flatten)]
    common: CommonTestArgs,

    /// Also write the rejected feature names/indices as CSV.
    #[arg(long)]
    rejected_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    M1,
    M2,
    M3,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ErrorArg {
    Normal,
    T3,
    Gamma,
    Lognormal,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    FarmH,
    FarmU,
    Fam,
    Naive,
    Oracle,
}

impl From<MethodArg> for MethodTag {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::FarmH => MethodTag::FarmH,
            MethodArg::FarmU => MethodTag::FarmU,
            MethodArg::Fam => MethodTag::Fam,
            MethodArg::Naive => MethodTag::Naive,
            MethodArg::Oracle => MethodTag::Oracle,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::M1)]
    model: ModelArg,

    #[arg(long, value_enum, default_value_t = ErrorArg::Normal)]
    error: ErrorArg,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 100)]
    p: usize,

    /// Non-null coordinates; default p/20 (5 percent).
    #[arg(long)]
    p1: Option<usize>,

    /// Signal strength of the non-null means.
    #[arg(long, default_value_t = 0.5)]
    signal: f64,

    /// Number of latent factors in the generator.
    #[arg(long, short = 'k', default_value_t = 3)]
    factors: usize,

    #[arg(long, default_value_t = 10)]
    reps: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// P-value threshold for FDP-estimation and power scoring.
    #[arg(long, default_value_t = 0.01)]
    pthresh: f64,

    /// Null-proportion parameter for the estimated FDP (0 disables).
    #[arg(long, default_value_t = 0.0)]
    eta: f64,

    /// Methods to run.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [MethodArg::FarmH, MethodArg::FarmU, MethodArg::Fam, MethodArg::Naive, MethodArg::Oracle])]
    methods: Vec<MethodArg>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Input CSV, rows = observations, columns = features.
    csv: PathBuf,

    #[arg(long, default_value_t = 5)]
    folds: usize,

    /// Constant grid, log-spaced.
    #[arg(long, default_value_t = 0.5)]
    grid_min: f64,
    #[arg(long, default_value_t = 16.0)]
    grid_max: f64,
    #[arg(long, default_value_t = 14)]
    grid_points: usize,

    /// Coordinates sampled for the shared constants.
    #[arg(long, default_value_t = 20)]
    subset: usize,

    /// Disable the skewness veto and moment matching (plain CV everywhere).
    #[arg(long)]
    plain_cv: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,

    /// Write the JSON fragment here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("FARMTEST_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let outcome = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Test2(args) => cmd_test2(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn build_config(common: &CommonTestArgs, shuffle_split: bool) -> Result<RobustConfig, CliError> {
    let mut taus = if common.tau_inf {
        TauSet::all_infinite()
    } else {
        TauSet::all_cv()
    };

    let fragment: Option<TauCalibration> = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let report: CalibrationReport = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("invalid calibration JSON: {e}")))?;
            Some(report.calibration)
        }
        None => None,
    };
    if let Some(c) = &fragment {
        taus.mean = TauRule::Explicit(c.tau_mean);
        taus.variance = TauRule::Explicit(c.tau_variance);
        taus.factor = TauRule::Explicit(c.gamma);
        taus.cov = TauRule::Explicit(match common.cov {
            CovArg::Utype => c.tau_utype,
            _ => c.tau_cov_entry,
        });
    }

    if let Some(t) = common.tau_mean {
        taus.mean = TauRule::Explicit(t);
    }
    if let Some(t) = common.tau_cov {
        taus.cov = TauRule::Explicit(t);
    }
    if let Some(t) = common.tau_var {
        taus.variance = TauRule::Explicit(t);
    }
    if let Some(t) = common.gamma {
        taus.factor = TauRule::Explicit(t);
    }

    let num_factors = match common.factors {
        Some(k) => FactorCount::Fixed(k),
        None => FactorCount::Auto { k_max: common.k_max },
    };

    let config = RobustConfig {
        alpha: common.alpha,
        eta: common.eta,
        num_factors,
        covariance_kind: common.cov.into(),
        taus,
        cv: CvPlan { seed: 0, ..CvPlan::default() },
        robust_factor_means: common.robust_factor_means,
        shuffle_split,
        seed: common.seed,
        ..RobustConfig::default()
    };
    config.validate().map_err(CliError::from_input_side)?;
    Ok(config)
}

fn write_output(path: &Option<PathBuf>, json: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, json)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn write_rejected_csv(
    path: &PathBuf,
    result: &TestResult,
    names: &[String],
) -> Result<(), CliError> {
    let mut out = String::from("index,name,statistic,pvalue\n");
    for &j in &result.rejected {
        out.push_str(&format!(
            "{j},{},{:?},{:?}\n",
            names[j], result.statistics[j], result.pvalues[j]
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let (data, names) = read_csv_matrix(&args.csv, args.common.header)?;
    let config = build_config(&args.common, args.shuffle_split)?;
    let result = if args.split {
        testing::farmtest_split(&data, &config)
    } else {
        testing::farmtest(&data, &config)
    }
    .map_err(CliError::numerical)?;
    let report = TestReport::new(&result, &names, &config);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(&args.common.out, &json)?;
    if let Some(path) = &args.rejected_csv {
        write_rejected_csv(path, &result, &names)?;
    }
    Ok(())
}

fn cmd_test2(args: Test2Args) -> Result<(), CliError> {
    let (data1, names) = read_csv_matrix(&args.csv1, args.common.header)?;
    let (data2, _) = read_csv_matrix(&args.csv2, args.common.header)?;
    if data1.p() != data2.p() {
        return Err(CliError::input(format!(
            "column counts differ: {} vs {}",
            data1.p(),
            data2.p()
        )));
    }
    let config = build_config(&args.common, false)?;
    let result =
        testing::farmtest_two_sample(&data1, &data2, &config).map_err(CliError::numerical)?;
    let report = TestReport::new(&result, &names, &config);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(&args.common.out, &json)?;
    if let Some(path) = &args.rejected_csv {
        write_rejected_csv(path, &result, &names)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let p1 = args.p1.unwrap_or_else(|| (args.p / 20).max(1));
    let scenario = Scenario {
        model: match args.model {
            ModelArg::M1 => Model::M1,
            ModelArg::M2 => Model::M2Synthetic,
            ModelArg::M3 => Model::M3Var1,
        },
        error: match args.error {
            ErrorArg::Normal => ErrorLaw::Normal,
            ErrorArg::T3 => ErrorLaw::T3,
            ErrorArg::Gamma => ErrorLaw::Gamma,
            ErrorArg::Lognormal => ErrorLaw::Lognormal,
        },
        n: args.n,
        p: args.p,
        p1,
        signal: args.signal,
        k: args.factors,
        seed: args.seed,
    };
    if args.reps == 0 {
        return Err(CliError::input("need at least one replication".into()));
    }
    scenario.validate().map_err(CliError::from_input_side)?;
    let methods: Vec<MethodTag> = args.methods.iter().map(|&m| m.into()).collect();
    if methods.is_empty() {
        return Err(CliError::input("need at least one method".into()));
    }
    let report = run_experiment(
        &scenario,
        &methods,
        args.reps,
        args.alpha,
        args.pthresh,
        args.eta,
    )
    .map_err(CliError::numerical)?;
    let wrapped = report::ExperimentReportDoc::new(report);
    let json = serde_json::to_string_pretty(&wrapped).expect("report serializes");
    write_output(&args.out, &json)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let (data, _) = read_csv_matrix(&args.csv, args.header)?;
    if args.grid_points < 2 || !(args.grid_min > 0.0) || args.grid_max <= args.grid_min {
        return Err(CliError::input("invalid constant grid".into()));
    }
    let lo = args.grid_min.ln();
    let hi = args.grid_max.ln();
    let grid: Vec<f64> = (0..args.grid_points)
        .map(|i| (lo + (hi - lo) * i as f64 / (args.grid_points - 1) as f64).exp())
        .collect();
    let mut plan = CvPlan {
        folds: args.folds,
        grid,
        subset_size: args.subset,
        seed: args.seed,
        ..CvPlan::default()
    };
    if args.plain_cv {
        plan = plan.without_refinements();
    }
    plan.validate().map_err(CliError::from_input_side)?;
    let calibration = calibrate_config(&data, &plan).map_err(CliError::numerical)?;
    let report = CalibrationReport::new(calibration, &plan);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(&args.out, &json)
}
