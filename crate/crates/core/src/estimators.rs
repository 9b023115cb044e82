//! Estimators of `(H, σ)` and of volatility functionals from the regularized
//! trajectory `X_ε`.
//!
//! Two families share one interface. `Additive` uses `Ẍ_ε` directly;
//! `Multiplicative` uses `Ẍ_ε / X_ε`, for models where the volatility is
//! proportional to the state.

use crate::constants::{gaussian_abs_moment, Order, SpectralGrid};
use crate::fbm::{HurstParam, Process};
use crate::kernel::{smooth, Kernel, Orders, SmoothedProcess};
use crate::stats::{mean, trapezoid};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Ratio `min|X_ε| / max|X_ε|` below which the multiplicative family refuses to divide.
pub const POSITIVITY_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Additive,
    Multiplicative,
}

impl Family {
    fn orders(self) -> Orders {
        match self {
            Family::Additive => Orders::SECOND,
            Family::Multiplicative => Orders::VALUE_AND_SECOND,
        }
    }
}

/// Windows `h_i = ε c_i` and the regression weights built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    pub eps: f64,
    pub c: Vec<f64>,
    /// `y_i = log c_i - mean(log c)`
    pub y: Vec<f64>,
    /// `z_i = y_i / Σ y_j²`
    pub z: Vec<f64>,
}

impl ScaleSet {
    pub fn new(eps: f64, c: &[f64]) -> Result<ScaleSet> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::arg("eps", format!("must be positive, got {eps}")));
        }
        if c.len() < 2 {
            return Err(Error::arg("scales", "need at least two scale factors"));
        }
        if c.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg("scales", "scale factors must be positive"));
        }
        let logs: Vec<f64> = c.iter().map(|v| v.ln()).collect();
        let m = mean(&logs);
        let y: Vec<f64> = logs.iter().map(|l| l - m).collect();
        let ss: f64 = y.iter().map(|v| v * v).sum();
        if ss <= 0.0 {
            return Err(Error::arg("scales", "scale factors must not all be equal"));
        }
        let z = y.iter().map(|v| v / ss).collect();
        Ok(ScaleSet { eps, c: c.to_vec(), y, z })
    }

    /// `h_i = ε c_i`.
    pub fn windows(&self) -> Vec<f64> {
        self.c.iter().map(|c| self.eps * c).collect()
    }

    /// `√c_i z_i / k`, the weights of the limiting variance of `Ĥ_k`.
    pub fn h_weights(&self, k: f64) -> Vec<f64> {
        self.c.iter().zip(&self.z).map(|(c, z)| c.sqrt() * z / k).collect()
    }
}

/// `ε^{2-H} Ẍ_ε / σ_{2H}`, divided by `X_ε` in the multiplicative family.
pub fn z_x_process(smoothed: &SmoothedProcess, h: HurstParam, sigma2h_sq: f64, family: Family) -> Result<Vec<f64>> {
    let scale = smoothed.eps.powf(2.0 - h.value()) / sigma2h_sq.sqrt();
    Ok(ratio(smoothed, family)?.into_iter().map(|v| v * scale).collect())
}

/// `Ẍ_ε` or `Ẍ_ε / X_ε` on the inner grid.
fn ratio(smoothed: &SmoothedProcess, family: Family) -> Result<Vec<f64>> {
    let dd = smoothed.second()?;
    match family {
        Family::Additive => Ok(dd.to_vec()),
        Family::Multiplicative => {
            let x = smoothed.value()?;
            let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min = x.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if !(min > POSITIVITY_GUARD * max) {
                return Err(Error::DegeneratePath(format!(
                    "min|X_ε| = {min:e} against max|X_ε| = {max:e}: the multiplicative statistics need X_ε bounded away from zero"
                )));
            }
            Ok(dd.iter().zip(x).map(|(d, v)| d / v).collect())
        }
    }
}

fn integral_abs_pow(values: &[f64], k: f64, dt: f64) -> f64 {
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(k)).collect();
    trapezoid(&powered, dt)
}

/// `M_k(ε) = ∫_0^1 |Ẍ_ε|^k` (or `|Ẍ_ε/X_ε|^k`).
pub fn m_k(smoothed: &SmoothedProcess, k: f64, family: Family) -> Result<f64> {
    check_k(k)?;
    Ok(integral_abs_pow(&ratio(smoothed, family)?, k, smoothed.dt))
}

/// `A_k(ε) = ∫|Z^X_ε|^k / (σ^k E|N|^k) - 1`.
pub fn a_k(
    smoothed: &SmoothedProcess,
    k: f64,
    sigma: f64,
    h: HurstParam,
    sigma2h_sq: f64,
    family: Family,
) -> Result<f64> {
    check_k(k)?;
    let z = z_x_process(smoothed, h, sigma2h_sq, family)?;
    Ok(integral_abs_pow(&z, k, smoothed.dt) / (sigma.powf(k) * gaussian_abs_moment(k)?) - 1.0)
}

/// `b_k = log(σ^k_{2H} σ^k E|N|^k)`, the intercept of `log M_k` against `log ε`.
pub fn b_k(k: f64, sigma: f64, sigma2h_sq: f64) -> Result<f64> {
    Ok(k * 0.5 * sigma2h_sq.ln() + k * sigma.ln() + gaussian_abs_moment(k)?.ln())
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::arg("k", format!("must be >= 1, got {k}")));
    }
    Ok(())
}

/// Output of the simultaneous regression estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEstimate {
    pub k: f64,
    pub h_hat: f64,
    pub b_hat: f64,
    /// `σ̂^k = exp(B̂_k) / (σ^k_{2Ĥ} E|N|^k)`.
    pub sigma_hat_pow_k: f64,
    pub sigma_hat: f64,
    /// `σ²_{2Ĥ}` by fresh quadrature at `Ĥ`.
    pub sigma2h_hat_sq: f64,
    pub log_m: Vec<f64>,
    /// Residuals of `log M_k(h_i)` about the fitted line.
    pub residuals: Vec<f64>,
    /// `Ĥ_k` fell outside `(1/2, 1)`.
    pub h_out_of_range: bool,
}

/// Regression step from per-scale `log M_k(h_i)`.
pub fn regression_from_log_m(
    scales: &ScaleSet,
    k: f64,
    log_m: &[f64],
    spectrum: &SpectralGrid,
) -> Result<RegressionEstimate> {
    check_k(k)?;
    if log_m.len() != scales.c.len() {
        return Err(Error::arg("log_m", "one value per scale required"));
    }
    if log_m.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegeneratePath("log M_k is not finite at some scale".into()));
    }
    let slope: f64 = scales.z.iter().zip(log_m).map(|(z, l)| z * l).sum();
    let h_hat = slope / k + 2.0;
    let log_h: Vec<f64> = scales.windows().iter().map(|w| w.ln()).collect();
    let b_hat = mean(log_m) - slope * mean(&log_h);
    let residuals = log_m.iter().zip(&log_h).map(|(l, lh)| l - (b_hat + slope * lh)).collect();
    let h_out_of_range = !(h_hat > 0.5 && h_hat < 1.0);
    let hp = HurstParam::new(h_hat).map_err(|_| {
        Error::Numerical(format!("estimated H = {h_hat} is outside (0, 1); σ_(2H) is undefined there"))
    })?;
    let sigma2h_hat_sq = spectrum.variance(Order::Second, hp)?;
    let sigma_hat_pow_k = b_hat.exp() / (sigma2h_hat_sq.powf(0.5 * k) * gaussian_abs_moment(k)?);
    Ok(RegressionEstimate {
        k,
        h_hat,
        b_hat,
        sigma_hat_pow_k,
        sigma_hat: sigma_hat_pow_k.powf(1.0 / k),
        sigma2h_hat_sq,
        log_m: log_m.to_vec(),
        residuals,
        h_out_of_range,
    })
}

/// `log M_k(εc_i)` at each scale of `scales`.
pub fn log_m_per_scale(process: &Process, kernel: Kernel, k: f64, scales: &ScaleSet, family: Family) -> Result<Vec<f64>> {
    scales
        .windows()
        .iter()
        .map(|&w| {
            let s = smooth(process, kernel, w, family.orders())?;
            let m = m_k(&s, k, family)?;
            if !(m > 0.0) || !m.ln().is_finite() {
                return Err(Error::DegeneratePath(format!("M_k vanishes at window {w}")));
            }
            Ok(m.ln())
        })
        .collect()
}

/// Simultaneous estimator of `(H, σ)` from the observed trajectory.
pub fn estimate_h_sigma(
    process: &Process,
    kernel: Kernel,
    k: f64,
    scales: &ScaleSet,
    family: Family,
    spectrum: &SpectralGrid,
) -> Result<RegressionEstimate> {
    if spectrum.kernel() != kernel {
        return Err(Error::arg("spectrum", "tabulated for a different kernel"));
    }
    let log_m = log_m_per_scale(process, kernel, k, scales, family)?;
    regression_from_log_m(scales, k, &log_m, spectrum)
}

/// `σ̃_k = (∫|Z^X_ε|^k)^{1/k} / ‖N‖_k` with `H` known.
pub fn sigma_known_h_from(smoothed: &SmoothedProcess, k: f64, h: HurstParam, sigma2h_sq: f64, family: Family) -> Result<f64> {
    check_k(k)?;
    h.require_estimable()?;
    let z = z_x_process(smoothed, h, sigma2h_sq, family)?;
    Ok((integral_abs_pow(&z, k, smoothed.dt) / gaussian_abs_moment(k)?).powf(1.0 / k))
}

pub fn estimate_sigma_known_h(
    process: &Process,
    kernel: Kernel,
    k: f64,
    eps: f64,
    h: HurstParam,
    sigma2h_sq: f64,
    family: Family,
) -> Result<f64> {
    let s = smooth(process, kernel, eps, family.orders())?;
    sigma_known_h_from(&s, k, h, sigma2h_sq, family)
}

/// Volatility functionals.
///
/// Order 2: `(1/E|N|^k) ∫ h(X_ε) |ε^{2-H} Ẍ_ε / σ_{2H}|^k`.
/// Order 1: `√(π/2) (ε^{1-H} / σ̃_{2H}) ∫ h(X_ε) |Ẋ_ε|` (`k` is 1).
/// Both target `∫ h(X) σ(X)^k`. `spectral_sq` is `σ²_{2H}` or `σ̃²_{2H}`.
pub fn functional_statistic(
    order: Order,
    h_fn: impl Fn(f64) -> f64,
    k: f64,
    smoothed: &SmoothedProcess,
    h: HurstParam,
    spectral_sq: f64,
) -> Result<f64> {
    let x = smoothed.value()?;
    let eps = smoothed.eps;
    match order {
        Order::Second => {
            check_k(k)?;
            let scale = eps.powf(2.0 - h.value()) / spectral_sq.sqrt();
            let vals: Vec<f64> =
                x.iter().zip(smoothed.second()?).map(|(xv, d)| h_fn(*xv) * (scale * d).abs().powf(k)).collect();
            Ok(trapezoid(&vals, smoothed.dt) / gaussian_abs_moment(k)?)
        }
        Order::First => {
            let scale = (core::f64::consts::PI / 2.0).sqrt() * eps.powf(1.0 - h.value()) / spectral_sq.sqrt();
            let vals: Vec<f64> = x.iter().zip(smoothed.first()?).map(|(xv, d)| h_fn(*xv) * d.abs()).collect();
            Ok(scale * trapezoid(&vals, smoothed.dt))
        }
    }
}

/// Sign changes of `values - level` between consecutive nodes.
pub fn crossing_count(values: &[f64], level: f64) -> usize {
    values.windows(2).filter(|w| (w[0] - level) * (w[1] - level) < 0.0).count()
}

/// Both sides of `∫ h(x) N_ε(x) dx = ∫_0^1 h(X_ε) |Ẋ_ε|` with `levels` level cells.
pub fn banach_check(h_fn: impl Fn(f64) -> f64, smoothed: &SmoothedProcess, levels: usize) -> Result<(f64, f64)> {
    let x = smoothed.value()?;
    let dx = smoothed.first()?;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = levels.max(1);
    let step = (hi - lo) / levels as f64;
    let lhs: f64 = (0..levels)
        .map(|j| {
            let level = lo + (j as f64 + 0.5) * step;
            h_fn(level) * crossing_count(x, level) as f64 * step
        })
        .sum();
    let vals: Vec<f64> = x.iter().zip(dx).map(|(xv, d)| h_fn(*xv) * d.abs()).collect();
    Ok((lhs, trapezoid(&vals, smoothed.dt)))
}

/// Local volatility `σ̂(x)` by localizing the order-2 functional with a
/// triangular window of half-width `bandwidth`. Points whose occupation mass
/// `∫ K_b(X_ε - x)` is below `min_mass` are masked (`None`).
pub fn pointwise_sigma(
    smoothed: &SmoothedProcess,
    k: f64,
    h: HurstParam,
    sigma2h_sq: f64,
    x_grid: &[f64],
    bandwidth: f64,
    min_mass: f64,
) -> Result<Vec<Option<f64>>> {
    if !(bandwidth > 0.0) {
        return Err(Error::arg("bandwidth", "must be positive"));
    }
    let x = smoothed.value()?;
    x_grid
        .iter()
        .map(|&x0| {
            let window = |v: f64| (1.0 - (v - x0).abs() / bandwidth).max(0.0);
            let occ: Vec<f64> = x.iter().map(|v| window(*v)).collect();
            let mass = trapezoid(&occ, smoothed.dt);
            if mass < min_mass {
                return Ok(None);
            }
            let f = functional_statistic(Order::Second, window, k, smoothed, h, sigma2h_sq)?;
            Ok(Some((f / mass).powf(1.0 / k)))
        })
        .collect()
}

/// `sup_{t ∈ [ε, 1]} ε^{2-H} |Ẍ_ε(t) - σ X_ε(t) b̈^ε_H(t)|` for the geometric
/// model, given the smoothed trajectory and the smoothed driving path.
pub fn multiplicative_remainder(x: &SmoothedProcess, b: &SmoothedProcess, sigma: f64, h: HurstParam) -> Result<f64> {
    if x.steps != b.steps || x.len() != b.len() {
        return Err(Error::arg("b", "must be smoothed with the same window and grid"));
    }
    let (xd, xv, bd) = (x.second()?, x.value()?, b.second()?);
    let scale = x.eps.powf(2.0 - h.value());
    Ok((x.steps..xd.len()).map(|i| scale * (xd[i] - sigma * xv[i] * bd[i]).abs()).fold(0.0, f64::max))
}
