//! Hermite expansion of `g_k(x) = |x|^k / E|N|^k - 1`.

use crate::special::gaussian_abs_moment;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// Default truncation for odd `k`.
pub const DEFAULT_N_MAX: usize = 12;

/// Coefficients `ĝ_{2n,k}`, `n = 1..=n_max`, of `g_k` in the basis `H_{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    pub k: u32,
    /// `coeffs[n-1] = ĝ_{2n,k}`.
    pub coeffs: Vec<f64>,
    pub n_max: usize,
    /// `E[g_k(N)²] - Σ ĝ²_{2n,k} (2n)!`, the squared L² truncation error.
    pub tail_bound: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Closed-form coefficients `ĝ_{2n,k} = (1/(2n)!) ∏_{i<n} (k - 2i)`.
pub fn g_coeffs(k: u32, n_max: usize) -> Result<HermiteSeries> {
    if k < 1 {
        return Err(Error::arg("k", format!("must be >= 1, got {k}")));
    }
    if n_max < 1 {
        return Err(Error::arg("n_max", "must be >= 1"));
    }
    let kf = k as f64;
    let mut coeffs = Vec::with_capacity(n_max);
    let mut prod = 1.0;
    for n in 1..=n_max {
        prod *= kf - 2.0 * (n as f64 - 1.0);
        coeffs.push(prod / factorial(2 * n));
    }
    let captured: f64 = coeffs.iter().enumerate().map(|(i, c)| c * c * factorial(2 * i + 2)).sum();
    let norm_sq = g_norm_sq(k)?;
    Ok(HermiteSeries { k, coeffs, n_max, tail_bound: (norm_sq - captured).max(0.0) })
}

/// Series with the default truncation: exact for even `k`, [`DEFAULT_N_MAX`] terms otherwise.
pub fn default_series(k: u32) -> Result<HermiteSeries> {
    let n_max = if k % 2 == 0 { (k as usize / 2).max(1) } else { DEFAULT_N_MAX };
    g_coeffs(k, n_max)
}

/// `E[g_k(N)²] = E|N|^{2k} / (E|N|^k)² - 1`.
pub fn g_norm_sq(k: u32) -> Result<f64> {
    let m = gaussian_abs_moment(k as f64)?;
    Ok(gaussian_abs_moment(2.0 * k as f64)? / (m * m) - 1.0)
}

impl HermiteSeries {
    /// `ĝ_{2n,k}` for `n ≥ 1` (zero beyond the truncation).
    pub fn coeff(&self, n: usize) -> f64 {
        if n == 0 { 0.0 } else { self.coeffs.get(n - 1).copied().unwrap_or(0.0) }
    }

    /// `Σ ĝ_{2n,k} H_{2n}(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c * crate::special::hermite(2 * i + 2, x)).sum()
    }

    /// `g_k(x) = |x|^k / E|N|^k - 1`.
    pub fn target(&self, x: f64) -> f64 {
        libm::pow(libm::fabs(x), self.k as f64) / gaussian_abs_moment(self.k as f64).unwrap_or(1.0) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive, gauss_hermite_prob};
    use crate::special::normal_pdf;
    use crate::special::hermite;

    #[test]
    fn leading_coefficient_is_half_k() {
        for k in 1..=4 {
            assert!((g_coeffs(k, 6).unwrap().coeff(1) - k as f64 / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn even_k_series_terminate() {
        let s = g_coeffs(2, 5).unwrap();
        assert_eq!(s.coeffs, alloc::vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(s.tail_bound < 1e-14);
        let s4 = g_coeffs(4, 5).unwrap();
        assert!(s4.coeffs[2..].iter().all(|c| *c == 0.0));
        assert!(s4.tail_bound < 1e-12);
    }

    #[test]
    fn k1_fourth_coefficient_by_quadrature() {
        let s = g_coeffs(1, 4).unwrap();
        assert!((s.coeff(2) + 1.0 / 24.0).abs() < 1e-15);
        // |x| has a kink at 0, so project on each half line separately
        let f = |x: f64| s.target(x) * hermite(4, x) * normal_pdf(x);
        let proj = 2.0 * adaptive(f, 0.0, 40.0, 1e-15, 1e-13, 200).value / 24.0;
        assert!((proj - s.coeff(2)).abs() < 1e-12, "{proj}");
    }

    #[test]
    fn tail_decreases_and_signs_alternate() {
        for k in [1u32, 3] {
            let mut last = f64::INFINITY;
            for n in 1..=12 {
                let t = g_coeffs(k, n).unwrap().tail_bound;
                assert!(t <= last);
                last = t;
            }
            let s = g_coeffs(k, 12).unwrap();
            let start = (k as usize).div_ceil(2);
            for n in start + 1..12 {
                assert!(s.coeff(n) * s.coeff(n + 1) < 0.0, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn reconstruction_error_matches_tail() {
        let s = g_coeffs(3, 12).unwrap();
        let (x, w) = gauss_hermite_prob(150);
        let err: f64 = x.iter().zip(&w).map(|(x, w)| w * (s.target(*x) - s.eval(*x)).powi(2)).sum();
        assert!(err <= s.tail_bound * 1.05 + 1e-6, "{err} vs {}", s.tail_bound);
    }
}
