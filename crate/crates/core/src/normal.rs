//! Standard normal CDF and quantile.
//!
//! `Phi` is evaluated through the complementary error function: a power series
//! on `[0, 2)` and a Lentz continued fraction beyond, both accurate to near
//! machine precision in absolute terms and to full relative precision in the
//! tail. The quantile inverts this same `Phi` by bisection plus Newton
//! polish, so there is no second approximation source.

use std::f64::consts::FRAC_1_SQRT_2;

const FRAC_2_SQRT_PI: f64 = 1.128_379_167_095_512_6;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// erf(x) by its Maclaurin series; used for |x| < 2 where it converges fast.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        let n = n as f64;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// erfc(x) for x >= 2 by the Laplace continued fraction (modified Lentz).
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..300 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/f with f the continued fraction value.
    FRAC_1_SQRT_PI * (-x * x).exp() / f
}

/// Complementary error function, accurate to ~1e-15 absolute and to full
/// relative precision for x >= 2.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 2.0 {
        if x > 27.0 {
            // exp(-x^2) underflows near here; the value is < 1e-300.
            return 0.0;
        }
        erfc_cf(x)
    } else if x <= -2.0 {
        2.0 - erfc(-x)
    } else {
        1.0 - erf_series(x)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * 0.398_942_280_401_432_7
}

/// Standard normal quantile: the z with `std_normal_cdf(z) = p`.
///
/// Bisection on `[-40, 40]` down to a narrow bracket, then Newton steps on
/// the same CDF; tolerance 1e-12 in probability.
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let mut lo = -40.0;
    let mut hi = 40.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..4 {
        let err = std_normal_cdf(z) - p;
        if err.abs() <= 1e-12 * p.min(1.0 - p) {
            break;
        }
        let dens = std_normal_pdf(z);
        if dens <= 0.0 {
            break;
        }
        let step = err / dens;
        z -= step.clamp(-1.0, 1.0);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: Phi via adaptive Simpson quadrature of the density.
    fn phi_quadrature(z: f64) -> f64 {
        fn simpson(a: f64, b: f64, steps: usize) -> f64 {
            let h = (b - a) / steps as f64;
            let f = |x: f64| std_normal_pdf(x);
            let mut s = f(a) + f(b);
            for i in 1..steps {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
            }
            s * h / 3.0
        }
        if z < 0.0 {
            return 1.0 - phi_quadrature(-z);
        }
        0.5 + simpson(0.0, z, 4096)
    }

    #[test]
    fn cdf_at_zero() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn cdf_near_975_quantile() {
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn cdf_matches_quadrature_oracle() {
        for &z in &[0.1, 0.5, 1.0, 1.959964, 2.5, 3.0, 4.0, 6.0, -0.7, -2.2, -5.0] {
            let want = phi_quadrature(z);
            assert!(
                (std_normal_cdf(z) - want).abs() < 1e-12,
                "z={z}: {} vs {}",
                std_normal_cdf(z),
                want
            );
        }
    }

    #[test]
    fn deep_tail_is_positive_and_tiny() {
        let v = std_normal_cdf(-10.0);
        assert!(v > 0.0 && v < 1e-22);
        // Known value: Phi(-10) = 7.619853e-24.
        assert!((v - 7.619_853_024_160_527e-24).abs() < 1e-29);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999, 1.0 - 1e-9] {
            let z = std_normal_quantile(p);
            assert!(
                (std_normal_cdf(z) - p).abs() <= 1e-11 * p.min(1.0 - p).max(1e-300),
                "p={p}"
            );
        }
        assert_eq!(std_normal_quantile(0.5), 0.0);
        assert!((std_normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn symmetry(z in -8.0f64..8.0) {
            prop_assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn monotone(a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(std_normal_cdf(lo) <= std_normal_cdf(hi));
        }
    }
}
