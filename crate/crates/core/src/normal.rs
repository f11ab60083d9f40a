//! Standard-normal density, distribution, tail, and quantile helpers.
//!
//! Everything is expressed through `erfc`, which stays accurate deep into the
//! tails where `1 − Φ(x)` would cancel. Quantiles start from Acklam's rational
//! approximation (≈1e-9 relative error) and take Newton steps against the
//! `erfc`-based distribution function, which converges to full double
//! precision in one or two iterations.

use std::f64::consts::{PI, SQRT_2};

/// Density `φ(x)`.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Distribution function `Φ(x) = erfc(−x/√2)/2`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `1 − Φ(x)`, computed without cancellation.
#[inline]
pub fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Two-sided p-value `2(1 − Φ(|t|)) = erfc(|t|/√2)`.
#[inline]
pub fn two_sided_p(t: f64) -> f64 {
    libm::erfc(t.abs() / SQRT_2)
}

/// Acklam's inverse normal CDF approximation, used only as a Newton seed.
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Solves `1 − Φ(z) = q` for `q ∈ (0, 1)`.
pub fn upper_quantile(q: f64) -> f64 {
    assert!(q > 0.0 && q < 1.0, "tail probability must lie in (0, 1), got {q}");
    let mut z = -acklam_quantile(q);
    for _ in 0..2 {
        let err = upper_tail(z) - q;
        z += err / pdf(z);
    }
    z
}

/// Quantile `Φ^{-1}(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1), got {p}");
    if p <= 0.5 {
        -upper_quantile(p)
    } else {
        upper_quantile(1.0 - p)
    }
}

/// Two-sided critical value `z_{1−α/2}`, i.e. the root of `erfc(z/√2) = α`.
pub fn two_sided_critical(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1), got {alpha}");
    upper_quantile(alpha / 2.0)
}
