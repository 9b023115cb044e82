//! Integrals of powers of `ρ_H` and the CLT variances built from them.

use super::hermite::HermiteSeries;
use super::spectral::rho_h_time_domain;
use crate::fbm::HurstParam;
use crate::kernel::Kernel;
use crate::quad::gauss_legendre;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Target for the estimated `∫_{|x|>X} ρ²` remainder.
pub const TAIL_TOL: f64 = 1e-8;
const MAX_CUTOFF: f64 = 1e4;

/// `∫ ρ_H^n(x, b, c) dx` for `n = 1..=n_max`, over `[-X, X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoPowerIntegrals {
    pub b: f64,
    pub c: f64,
    /// `powers[n-1] = ∫ ρ^n`.
    pub powers: Vec<f64>,
    pub cutoff: f64,
    /// Estimated `∫_{|x|>X} ρ²` from a power-law fit of the decay.
    pub tail_estimate: f64,
}

impl RhoPowerIntegrals {
    pub fn power(&self, n: usize) -> f64 {
        self.powers[n - 1]
    }
}

/// Panel edges on `[lo, hi]`: the kinks of `ρ(·, b, c)` with geometric grading
/// towards each of them (`ρ` behaves like `|x - k|^{2H}` there), half-unit
/// spacing near the origin and geometric growth further out.
fn panel_edges(lo: f64, hi: f64, kinks: &[f64]) -> Vec<f64> {
    let mut edges: Vec<f64> = Vec::new();
    for &k in kinks {
        edges.push(k);
        for j in 1..=16 {
            let d = 0.5 * 0.5f64.powi(j);
            edges.push(k - d);
            edges.push(k + d);
        }
    }
    let mut push_side = |sign: f64, limit: f64| {
        let mut x = 0.0f64;
        while x < limit {
            let step = (0.5f64).max(x / 8.0);
            x = (x + step).min(limit);
            edges.push(sign * x);
        }
    };
    if hi > 0.0 {
        push_side(1.0, hi);
    }
    if lo < 0.0 {
        push_side(-1.0, -lo);
    }
    edges.push(lo.max(0.0).min(hi));
    edges.push(lo);
    edges.push(hi);
    edges.retain(|e| *e >= lo && *e <= hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    edges
}

/// Integrates all powers of `ρ_H(·, b, c)`, enlarging the cutoff until the
/// fitted tail of `∫ρ²` is below [`TAIL_TOL`].
pub fn rho_power_integrals(
    b: f64,
    c: f64,
    h: HurstParam,
    kernel: Kernel,
    sigma2h_sq: f64,
    n_max: usize,
) -> Result<RhoPowerIntegrals> {
    let m = kernel.measure(2);
    let pts = m.breakpoints();
    let mut kinks = Vec::new();
    for s in &pts {
        for r in &pts {
            kinks.push(b * s - c * r);
        }
    }
    let (gx, gw) = gauss_legendre(16);
    let rho = |x: f64| rho_h_time_domain(x, b, c, h, kernel, sigma2h_sq);
    let mut powers = alloc::vec![0.0; n_max];
    let add_range = |lo: f64, hi: f64, powers: &mut Vec<f64>| -> Result<()> {
        let edges = panel_edges(lo, hi, &kinks);
        for w in edges.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in gx.iter().zip(&gw) {
                let r = rho(mid + half * x)?;
                let mut p = 1.0;
                for acc in powers.iter_mut() {
                    p *= r;
                    *acc += wt * half * p;
                }
            }
        }
        Ok(())
    };
    let mut cutoff = 40.0 * b.max(c);
    add_range(-cutoff, cutoff, &mut powers)?;
    loop {
        let tail = tail_estimate(&rho, cutoff)?;
        if tail < TAIL_TOL {
            return Ok(RhoPowerIntegrals { b, c, powers, cutoff, tail_estimate: tail });
        }
        if cutoff >= MAX_CUTOFF {
            return Err(Error::Numerical(format!(
                "∫ρ² tail estimate {tail:e} exceeds {TAIL_TOL:e} at cutoff {cutoff}"
            )));
        }
        add_range(cutoff, 2.0 * cutoff, &mut powers)?;
        add_range(-2.0 * cutoff, -cutoff, &mut powers)?;
        cutoff *= 2.0;
    }
}

/// Fits `|ρ(x)| ≈ C|x|^{-κ}` from `X/2` and `X` on each side; returns
/// `Σ_sides ∫_X^∞ ρ²`.
fn tail_estimate(rho: &impl Fn(f64) -> Result<f64>, cutoff: f64) -> Result<f64> {
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let (r1, r2) = (rho(sign * 0.5 * cutoff)?.abs(), rho(sign * cutoff)?.abs());
        if r2 == 0.0 {
            continue;
        }
        let kappa = (r1 / r2).ln() / 2f64.ln();
        if !(2.0 * kappa > 1.0) {
            return Ok(f64::INFINITY);
        }
        total += r2 * r2 * cutoff / (2.0 * kappa - 1.0);
    }
    Ok(total)
}

/// A CLT variance together with its error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltVariance {
    pub value: f64,
    /// Hermite truncation: `tail_bound · ∫ρ²`, since `|ρ| ≤ 1`.
    pub truncation_error: f64,
    /// Cutoff remainder bound from the decay fit.
    pub tail_error: f64,
}

/// `(1/√(bc)) Σ_n ĝ²_{2n} (2n)! ∫ ρ^{2n}(x, b, c) dx` from precomputed integrals.
pub fn rho_g_from(series: &HermiteSeries, ints: &RhoPowerIntegrals) -> Result<CltVariance> {
    if ints.powers.len() < 2 * series.n_max {
        return Err(Error::arg("series", "more Hermite terms than computed ρ powers"));
    }
    let mut value = 0.0;
    let mut fact = 1.0;
    for n in 1..=series.n_max {
        fact *= ((2 * n - 1) * (2 * n)) as f64;
        value += series.coeff(n).powi(2) * fact * ints.power(2 * n);
    }
    let norm = 1.0 / (ints.b * ints.c).sqrt();
    let captured: f64 = (1..=series.n_max).map(|n| series.coeff(n).powi(2)).sum::<f64>().max(1e-300);
    Ok(CltVariance {
        value: norm * value,
        truncation_error: norm * series.tail_bound * ints.power(2),
        tail_error: norm * ints.tail_estimate * (value / ints.power(2).max(1e-300)).max(captured),
    })
}

/// `σ²_g = ρ_g(1, 1)`.
pub fn sigma_g_sq(series: &HermiteSeries, h: HurstParam, kernel: Kernel, sigma2h_sq: f64) -> Result<CltVariance> {
    rho_g(1.0, 1.0, series, h, kernel, sigma2h_sq)
}

pub fn rho_g(
    b: f64,
    c: f64,
    series: &HermiteSeries,
    h: HurstParam,
    kernel: Kernel,
    sigma2h_sq: f64,
) -> Result<CltVariance> {
    let ints = rho_power_integrals(b, c, h, kernel, sigma2h_sq, 2 * series.n_max)?;
    rho_g_from(series, &ints)
}

/// Matrix `ρ_g(c_i, c_j)` for a list of scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCovariance {
    pub scales: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
}

impl ScaleCovariance {
    pub fn compute(
        scales: &[f64],
        series: &HermiteSeries,
        h: HurstParam,
        kernel: Kernel,
        sigma2h_sq: f64,
    ) -> Result<ScaleCovariance> {
        let n = scales.len();
        let mut matrix = alloc::vec![alloc::vec![0.0; n]; n];
        // ρ_g(c, c) is scale free and ρ_g(b, c) = ρ_g(c, b)
        let diag = if n > 0 { sigma_g_sq(series, h, kernel, sigma2h_sq)?.value } else { 0.0 };
        for i in 0..n {
            matrix[i][i] = diag;
            for j in i + 1..n {
                let v = rho_g(scales[i], scales[j], series, h, kernel, sigma2h_sq)?.value;
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        Ok(ScaleCovariance { scales: scales.to_vec(), matrix })
    }

    /// `Σ_ij d_i d_j ρ_g(c_i, c_j)`.
    pub fn quadratic_form(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.scales.len() {
            return Err(Error::arg("d", format!("expected {} weights, got {}", self.scales.len(), d.len())));
        }
        let mut v = 0.0;
        for (i, di) in d.iter().enumerate() {
            for (j, dj) in d.iter().enumerate() {
                v += di * dj * self.matrix[i][j];
            }
        }
        if v < -1e-10 {
            return Err(Error::Numerical(format!("σ²_(g,m) = {v} is negative")));
        }
        Ok(v.max(0.0))
    }
}

pub fn sigma_gm_sq(
    c: &[f64],
    d: &[f64],
    series: &HermiteSeries,
    h: HurstParam,
    kernel: Kernel,
    sigma2h_sq: f64,
) -> Result<f64> {
    if c.len() != d.len() {
        return Err(Error::arg("d", "must have one weight per scale"));
    }
    if c.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::arg("c", "scales must be positive"));
    }
    if d.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    ScaleCovariance::compute(c, series, h, kernel, sigma2h_sq)?.quadratic_form(d)
}

#[cfg(test)]
mod tests {
    use super::super::hermite::{default_series, g_coeffs};
    use super::super::spectral::{spectral_variance, Order};
    use super::*;

    fn setup(h: f64, k: Kernel) -> (HurstParam, f64) {
        let h = HurstParam::new(h).unwrap();
        (h, spectral_variance(Order::Second, h, k).unwrap().value())
    }

    #[test]
    fn k2_single_term() {
        let (h, s2) = setup(0.7, Kernel::SecondDifference);
        let ints = rho_power_integrals(1.0, 1.0, h, Kernel::SecondDifference, s2, 4).unwrap();
        let v = sigma_g_sq(&default_series(2).unwrap(), h, Kernel::SecondDifference, s2).unwrap();
        assert!((v.value - 2.0 * ints.power(2)).abs() < 1e-10);
        assert!(ints.tail_estimate < TAIL_TOL);
    }

    #[test]
    fn triangular_rho_squared_as_lag_sum() {
        // on integer lags the triangular ρ is the correlation of discrete second
        // differences; piecewise structure means the integral is not a plain lag
        // sum, but the x = 0..3 values pin the shape
        let (h, s2) = setup(0.7, Kernel::SecondDifference);
        let r = |x: f64| rho_h_time_domain(x, 1.0, 1.0, h, Kernel::SecondDifference, s2).unwrap();
        let hh = 1.4f64;
        let g = |j: f64| (j + 2.0).abs().powf(hh) - 4.0 * (j + 1.0).abs().powf(hh) + 6.0 * j.abs().powf(hh)
            - 4.0 * (j - 1.0).abs().powf(hh)
            + (j - 2.0).abs().powf(hh);
        for j in [1.0, 2.0, 3.0] {
            assert!((r(j) - g(j) / g(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_free_diagonal_and_symmetry() {
        let (h, s2) = setup(0.7, Kernel::SecondDifference);
        let series = default_series(2).unwrap();
        let a = rho_g(2.0, 2.0, &series, h, Kernel::SecondDifference, s2).unwrap().value;
        let b = rho_g(1.0, 1.0, &series, h, Kernel::SecondDifference, s2).unwrap().value;
        assert!((a - b).abs() < 1e-7 * b, "{a} {b}");
        let x = rho_g(1.0, 2.0, &series, h, Kernel::SecondDifference, s2).unwrap().value;
        let y = rho_g(2.0, 1.0, &series, h, Kernel::SecondDifference, s2).unwrap().value;
        assert!((x - y).abs() < 1e-9);
    }

    #[test]
    fn quadratic_form_psd_and_zero() {
        let (h, s2) = setup(0.7, Kernel::SecondDifference);
        let series = default_series(2).unwrap();
        let cov = ScaleCovariance::compute(&[1.0, 2.0, 4.0], &series, h, Kernel::SecondDifference, s2).unwrap();
        assert_eq!(cov.quadratic_form(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let mut state = 7u64;
        for _ in 0..50 {
            let d: Vec<f64> = (0..3)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            assert!(cov.quadratic_form(&d).is_ok());
        }
    }

    #[test]
    fn minimality_of_k2() {
        for hv in [0.6, 0.7, 0.85] {
            let (h, s2) = setup(hv, Kernel::SecondDifference);
            let ints = rho_power_integrals(1.0, 1.0, h, Kernel::SecondDifference, s2, 24).unwrap();
            let v2 = rho_g_from(&g_coeffs(2, 1).unwrap(), &ints).unwrap().value / 4.0;
            for k in [1u32, 3, 4] {
                let vk = rho_g_from(&default_series(k).unwrap(), &ints).unwrap().value / (k * k) as f64;
                assert!(vk >= v2, "h={hv} k={k}: {vk} < {v2}");
            }
        }
    }
}
