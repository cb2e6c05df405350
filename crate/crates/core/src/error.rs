//! Error types shared across the crate.

use thiserror::Error;

/// Pipeline stage used to tag errors propagated out of [`crate::testing::farmtest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Covariance,
    Eigen,
    Loadings,
    Factors,
    Means,
    Variances,
    Threshold,
    Generate,
    Calibrate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Covariance => "covariance",
            Stage::Eigen => "eigendecomposition",
            Stage::Loadings => "loadings",
            Stage::Factors => "factor regression",
            Stage::Means => "robust means",
            Stage::Variances => "residual variances",
            Stage::Threshold => "threshold search",
            Stage::Generate => "data generation",
            Stage::Calibrate => "calibration",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("{context}: need at least {min} samples, got {got}")]
    TooFewSamples {
        context: &'static str,
        min: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "solver did not converge after {iterations} iterations \
         (last iterate {last}, residual {residual})"
    )]
    NoConvergence {
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("eigendecomposition did not converge within {0} sweeps")]
    EigNoConvergence(usize),

    #[error("loading matrix is rank deficient")]
    RankDeficient,

    #[error("entry ({row}, {col}): {source}")]
    AtEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("column {col}: {source}")]
    AtColumn {
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep}: {source}")]
    AtRep {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_entry(row: usize, col: usize, source: Error) -> Self {
        Error::AtEntry {
            row,
            col,
            source: Box::new(source),
        }
    }

    pub fn at_column(col: usize, source: Error) -> Self {
        Error::AtColumn {
            col,
            source: Box::new(source),
        }
    }

    pub fn at_stage(stage: Stage, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    pub fn at_rep(rep: usize, source: Error) -> Self {
        Error::AtRep {
            rep,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
