//! Latent-factor machinery: loadings from the spiked eigenstructure, robust
//! factor regression, residual variances, and factor-number selection.

use rayon::prelude::*;

use crate::eig::{symmetric_eig, EigDecomp};
use crate::error::{Error, Result};
use crate::huber::{self, HuberParam};
use crate::mat::{solve_in_place, DataMatrix, Matrix, SymMatrix};

/// Fitted factor structure consumed by the test-statistic stage.
#[derive(Debug, Clone)]
pub struct FactorFit {
    /// Number of factors retained.
    pub k: usize,
    /// p x K loading matrix; column k is `sqrt(max(lambda_k, 0)) * v_k`.
    pub loadings: Matrix,
    /// Estimate of the averaged latent factor, length K.
    pub factor: Vec<f64>,
    /// Per-coordinate residual variances, floored strictly above zero.
    pub residual_variances: Vec<f64>,
    /// Retained eigenvalues after truncation at zero.
    pub eigenvalues: Vec<f64>,
}

/// Loadings from a covariance estimate: column `k` of the result is
/// `sqrt(max(lambda_k, 0)) * v_k`; negative eigenvalues give zero columns.
pub fn estimate_loadings(cov: &SymMatrix, k: usize) -> Result<Matrix> {
    let decomp = symmetric_eig(cov)?;
    loadings_from_eig(&decomp, k)
}

/// Same as [`estimate_loadings`] but reusing an existing decomposition.
pub fn loadings_from_eig(decomp: &EigDecomp, k: usize) -> Result<Matrix> {
    let p = decomp.eigenvalues.len();
    if k == 0 || k > p {
        return Err(Error::InvalidParam(format!(
            "factor count must be in 1..={p}, got {k}"
        )));
    }
    let mut b = Matrix::zeros(p, k);
    for c in 0..k {
        let scale = decomp.eigenvalues[c].max(0.0).sqrt();
        for r in 0..p {
            b.set(r, c, scale * decomp.eigenvectors.get(r, c));
        }
    }
    Ok(b)
}

/// Closed-form least squares `(B^T B)^{-1} B^T y`.
fn least_squares(loadings: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let k = loadings.cols();
    let gram = loadings.gram();
    let mut a = gram.data().to_vec();
    let mut rhs = loadings.tr_mul_vec(y);
    solve_in_place(&mut a, &mut rhs, k)?;
    Ok(rhs)
}

fn huber_objective(loadings: &Matrix, y: &[f64], f: &[f64], gamma: f64) -> f64 {
    let fitted = loadings.mul_vec(f);
    y.iter()
        .zip(&fitted)
        .map(|(yi, fi)| {
            let r = yi - fi;
            let a = r.abs();
            if a <= gamma {
                0.5 * r * r
            } else {
                gamma * a - 0.5 * gamma * gamma
            }
        })
        .sum()
}

/// Minimizes `sum_j loss_gamma(y_j - b_j^T f)` over `f` by iteratively
/// reweighted least squares, initialized at the least-squares solution, with
/// step halving if the objective fails to decrease. `gamma = INFINITE`
/// returns the least-squares solution exactly.
pub fn estimate_factors(
    xbar: &[f64],
    loadings: &Matrix,
    gamma: HuberParam,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if xbar.len() != loadings.rows() {
        return Err(Error::Shape(format!(
            "mean vector length {} does not match loadings rows {}",
            xbar.len(),
            loadings.rows()
        )));
    }
    let k = loadings.cols();
    let mut f = least_squares(loadings, xbar)?;
    if gamma.is_unbounded() {
        return Ok(f);
    }
    let g = gamma.value();

    let mut obj = huber_objective(loadings, xbar, &f, g);
    for _ in 0..max_iter {
        // Gradient of the objective: -sum_j psi_gamma(r_j) b_j.
        let fitted = loadings.mul_vec(&f);
        let mut grad = vec![0.0; k];
        for (j, (yj, fj)) in xbar.iter().zip(&fitted).enumerate() {
            let psi = huber::psi_unchecked(yj - fj, g);
            for (c, gc) in grad.iter_mut().enumerate() {
                *gc -= psi * loadings.get(j, c);
            }
        }
        let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        if grad_norm <= tol {
            return Ok(f);
        }

        // Weighted normal equations with Huber weights w_j = min(1, gamma/|r_j|).
        let mut a = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (j, (yj, fj)) in xbar.iter().zip(&fitted).enumerate() {
            let r = yj - fj;
            let w = if r.abs() <= g { 1.0 } else { g / r.abs() };
            for c1 in 0..k {
                let bj1 = loadings.get(j, c1);
                rhs[c1] += w * bj1 * yj;
                for c2 in c1..k {
                    a[c1 * k + c2] += w * bj1 * loadings.get(j, c2);
                }
            }
        }
        for c1 in 0..k {
            for c2 in 0..c1 {
                a[c1 * k + c2] = a[c2 * k + c1];
            }
        }
        let mut next = rhs;
        solve_in_place(&mut a, &mut next, k)?;

        // Step halving on objective increase.
        let mut step = 1.0;
        let mut candidate: Vec<f64> = next.clone();
        let mut cand_obj = huber_objective(loadings, xbar, &candidate, g);
        let mut halvings = 0;
        while cand_obj > obj && halvings < 40 {
            step *= 0.5;
            for (c, (fv, nv)) in candidate.iter_mut().zip(f.iter().zip(&next)) {
                *c = fv + step * (nv - fv);
            }
            cand_obj = huber_objective(loadings, xbar, &candidate, g);
            halvings += 1;
        }
        let moved = candidate
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        f = candidate;
        obj = cand_obj;
        if moved == 0.0 {
            // Fixed point at floating-point resolution: no further progress
            // is possible and, by convexity, this is the minimizer.
            return Ok(f);
        }
    }

    // Accept if the gradient is at the tolerance; otherwise report failure.
    let fitted = loadings.mul_vec(&f);
    let mut grad_norm = 0.0;
    let mut grad = vec![0.0; k];
    for (j, (yj, fj)) in xbar.iter().zip(&fitted).enumerate() {
        let psi = huber::psi_unchecked(yj - fj, g);
        for (c, gc) in grad.iter_mut().enumerate() {
            *gc -= psi * loadings.get(j, c);
        }
    }
    for gc in &grad {
        grad_norm += gc * gc;
    }
    grad_norm = grad_norm.sqrt();
    if grad_norm <= tol {
        Ok(f)
    } else {
        Err(Error::NoConvergence { iterations: max_iter, last: f[0], residual: grad_norm })
    }
}

/// Per-coordinate residual variances: robust second moment of the squared
/// column with lower bound `mu_j^2 + ||b_j||^2`, minus that bound, floored at
/// `variance_floor`.
pub fn residual_variances(
    data: &DataMatrix,
    mu_hat: &[f64],
    loadings: &Matrix,
    tau_var: HuberParam,
    variance_floor: f64,
) -> Result<Vec<f64>> {
    residual_variances_per(
        data,
        mu_hat,
        loadings,
        &crate::huber::TauPer::Shared(tau_var),
        variance_floor,
    )
}

/// [`residual_variances`] with per-column parameters.
pub fn residual_variances_per(
    data: &DataMatrix,
    mu_hat: &[f64],
    loadings: &Matrix,
    tau_var: &crate::huber::TauPer,
    variance_floor: f64,
) -> Result<Vec<f64>> {
    let p = data.p();
    if mu_hat.len() != p || loadings.rows() != p {
        return Err(Error::Shape(format!(
            "inconsistent shapes: p={p}, means={}, loading rows={}",
            mu_hat.len(),
            loadings.rows()
        )));
    }
    tau_var.check_len(p)?;
    (0..p)
        .into_par_iter()
        .map(|j| {
            let b_sq: f64 = (0..loadings.cols()).map(|c| loadings.get(j, c).powi(2)).sum();
            let bound = mu_hat[j] * mu_hat[j] + b_sq;
            let squares: Vec<f64> = (0..data.n()).map(|i| data.get(i, j).powi(2)).collect();
            let theta = huber::huber_second_moment(&squares, tau_var.get(j), bound)
                .map_err(|e| Error::at_column(j, e))?;
            Ok((theta - bound).max(variance_floor))
        })
        .collect()
}

/// Eigenvalue-ratio choice of the number of factors: the k in `1..=k_max`
/// maximizing `lambda_k / lambda_{k+1}`, ties broken toward the smallest k.
/// A non-positive `lambda_{k+1}` marks the rank boundary: the ratio counts as
/// infinite when `lambda_k > 0` and the position is skipped otherwise.
pub fn select_num_factors(eigenvalues: &[f64], k_max: usize) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::InvalidParam("k_max must be at least 1".into()));
    }
    if eigenvalues.len() < k_max + 1 {
        return Err(Error::InvalidParam(format!(
            "need at least k_max+1 = {} eigenvalues, got {}",
            k_max + 1,
            eigenvalues.len()
        )));
    }
    let mut best_k = 0usize;
    let mut best_ratio = f64::NEG_INFINITY;
    for k in 1..=k_max {
        let num = eigenvalues[k - 1];
        let den = eigenvalues[k];
        let ratio = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            continue;
        };
        if ratio > best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    if best_k == 0 {
        return Err(Error::InvalidParam(
            "eigenvalue-ratio selection needs a positive leading eigenvalue".into(),
        ));
    }
    Ok(best_k)
}
