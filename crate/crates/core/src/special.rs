//! Gamma function, standard normal law, Gaussian absolute moments and
//! probabilists' Hermite polynomials.

use crate::{Error, Result};
use core::f64::consts::{PI, SQRT_2};
#[allow(unused_imports)]
use num_traits::Float;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `P(N > x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
///
/// Rational starting point (Acklam) refined by two Halley steps.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2,
        1.383577518672690e2, -3.066479806614716e1, 2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2,
        6.680131188771972e1, -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838,
        -2.549732539343734, 4.374664141464968, 2.938163982698783,
    ];
    const D: [f64; 4] =
        [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let p_low = 0.02425;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// `E|N|^k = 2^{k/2} Γ((k+1)/2) / √π` for a standard Gaussian `N`.
pub fn gaussian_abs_moment(k: f64) -> Result<f64> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::arg("k", alloc::format!("absolute moment order must be >= 1, got {k}")));
    }
    Ok(2f64.powf(k / 2.0) * gamma((k + 1.0) / 2.0) / PI.sqrt())
}

/// Probabilists' Hermite polynomial `H_n(x)` via `H_{n+1} = x H_n - n H_{n-1}`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for j in 1..n {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_moments() {
        assert!((gaussian_abs_moment(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gaussian_abs_moment(1.0).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-14);
        assert!((gaussian_abs_moment(4.0).unwrap() - 3.0).abs() < 1e-13);
        assert!(gaussian_abs_moment(0.5).is_err());
    }

    #[test]
    fn hermite_recurrence() {
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(0, 5.0), 1.0);
        assert_eq!(hermite(1, -0.25), -0.25);
        // H_3 = x^3 - 3x
        assert!((hermite(3, 1.5) - (1.5f64.powi(3) - 4.5)).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.05, 0.3, 0.5, 0.8, 0.95, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-13 * p.max(1e-3), "p={p}");
        }
        assert!((normal_quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-12);
    }
}
