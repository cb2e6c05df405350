//! Scalar Huber primitives and one-dimensional robust M-estimators.
//!
//! The Huber loss is quadratic inside `[-tau, tau]` and linear outside; its
//! derivative `psi` clips residual influence at `tau`. Location estimates are
//! the minimizers of the summed loss, equivalently the roots of the monotone
//! score `sum_i psi_tau(x_i - theta)`. The solver is a damped Newton iteration
//! on the smooth convex objective with a guaranteed bisection fallback, so the
//! result is deterministic for any input.

use crate::error::{Error, Result};

/// Default tolerance on the score residual `|sum psi| / n`.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for the location solver.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Robustification parameter: the quadratic/linear crossover of the loss.
///
/// `HuberParam::INFINITE` is an accepted sentinel meaning "quadratic loss
/// everywhere"; location estimates then degenerate to the sample mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParam(f64);

impl HuberParam {
    /// Sentinel for the unbounded (purely quadratic) loss.
    pub const INFINITE: HuberParam = HuberParam(f64::INFINITY);

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "robustification parameter must be positive, got {tau}"
            )));
        }
        Ok(HuberParam(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_unbounded(self) -> bool {
        self.0.is_infinite()
    }
}

/// Robustification parameters for a family of coordinates: either one value
/// shared by all columns or one value per column. Shared constants with
/// per-column scales produce the per-column form.
#[derive(Debug, Clone, PartialEq)]
pub enum TauPer {
    Shared(HuberParam),
    PerColumn(Vec<HuberParam>),
}

impl TauPer {
    pub fn get(&self, j: usize) -> HuberParam {
        match self {
            TauPer::Shared(t) => *t,
            TauPer::PerColumn(v) => v[j],
        }
    }

    pub fn check_len(&self, p: usize) -> crate::error::Result<()> {
        if let TauPer::PerColumn(v) = self {
            if v.len() != p {
                return Err(Error::InvalidParam(format!(
                    "per-column parameters: expected {p}, got {}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Result of a one-dimensional Huber location fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationEstimate {
    /// The fitted location.
    pub value: f64,
    /// Newton/bisection iterations consumed.
    pub iterations: usize,
    /// `|sum_i psi_tau(x_i - value)| / n` at the returned value.
    pub residual: f64,
}

/// Huber loss `u^2/2` for `|u| <= tau`, `tau|u| - tau^2/2` beyond.
pub fn huber_loss(u: f64, tau: HuberParam) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFinite { context: "huber_loss input" });
    }
    Ok(loss_unchecked(u, tau.value()))
}

/// Derivative of the Huber loss: `min(|u|, tau) * sign(u)`.
pub fn huber_psi(u: f64, tau: HuberParam) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFinite { context: "huber_psi input" });
    }
    Ok(psi_unchecked(u, tau.value()))
}

#[inline]
fn loss_unchecked(u: f64, tau: f64) -> f64 {
    let a = u.abs();
    if a <= tau {
        0.5 * u * u
    } else {
        tau * a - 0.5 * tau * tau
    }
}

#[inline]
pub(crate) fn psi_unchecked(u: f64, tau: f64) -> f64 {
    if u > tau {
        tau
    } else if u < -tau {
        -tau
    } else {
        u
    }
}

/// Score `sum_i psi_tau(x_i - theta)` and the number of in-band residuals.
fn score(samples: &[f64], theta: f64, tau: f64) -> (f64, usize) {
    let mut s = 0.0;
    let mut in_band = 0usize;
    for &x in samples {
        let r = x - theta;
        if r.abs() <= tau {
            s += r;
            in_band += 1;
        } else if r > 0.0 {
            s += tau;
        } else {
            s -= tau;
        }
    }
    (s, in_band)
}

fn median_of(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn validate_samples(samples: &[f64], context: &'static str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { context, min: 1, got: 0 });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context });
    }
    Ok(())
}

/// M-estimator of location: minimizes `sum_i loss_tau(x_i - theta)`.
///
/// Damped Newton from the sample median (the second derivative is the in-band
/// count), safeguarded by bisection on the bracket `[min x, max x]`; the score
/// is strictly decreasing piecewise-linear so the bracket always closes.
/// `tau = HuberParam::INFINITE` short-circuits to the sample mean.
pub fn huber_location(
    samples: &[f64],
    tau: HuberParam,
    tol: f64,
    max_iter: usize,
) -> Result<LocationEstimate> {
    validate_samples(samples, "huber_location samples")?;
    let n = samples.len() as f64;

    if tau.is_unbounded() {
        let mean = samples.iter().sum::<f64>() / n;
        let resid = samples.iter().map(|x| x - mean).sum::<f64>().abs() / n;
        return Ok(LocationEstimate { value: mean, iterations: 0, residual: resid });
    }
    let tau = tau.value();

    let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        // All samples equal: unique minimizer.
        return Ok(LocationEstimate { value: lo, iterations: 0, residual: 0.0 });
    }

    let mut theta = median_of(samples);
    for iter in 0..max_iter {
        let (g, in_band) = score(samples, theta, tau);
        if g.abs() / n <= tol {
            return Ok(LocationEstimate { value: theta, iterations: iter, residual: g.abs() / n });
        }
        // Maintain the bracket: score decreases in theta.
        if g > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = if in_band > 0 { theta + g / in_band as f64 } else { f64::NAN };
        theta = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    let (g, _) = score(samples, theta, tau);
    Err(Error::NoConvergence {
        iterations: max_iter,
        last: theta,
        residual: g.abs() / n,
    })
}

/// Robust second moment: Huber location of the squared observations, clamped
/// below at `lower_bound`.
///
/// The objective is convex in `theta`, so the constrained minimizer over
/// `theta >= lower_bound` is exactly the clamp of the unconstrained one.
pub fn huber_second_moment(
    squared_samples: &[f64],
    tau: HuberParam,
    lower_bound: f64,
) -> Result<f64> {
    if !lower_bound.is_finite() {
        return Err(Error::NonFinite { context: "huber_second_moment lower bound" });
    }
    let est = huber_location(squared_samples, tau, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(est.value.max(lower_bound))
}

/// Robust pairwise moment: Huber location of elementwise products.
pub fn huber_pairwise_moment(products: &[f64], tau: HuberParam) -> Result<f64> {
    Ok(huber_location(products, tau, DEFAULT_TOL, DEFAULT_MAX_ITER)?.value)
}
