//! Asymptotic constants: spectral variances, lag correlations, Hermite series
//! and the CLT variances of the estimators, all evaluated by quadrature.

mod clt;
mod hermite;
mod pair;
mod spectral;

pub use crate::special::{gaussian_abs_moment, hermite as hermite_eval};
pub use clt::{
    rho_g, rho_g_from, rho_power_integrals, sigma_g_sq, sigma_gm_sq, CltVariance, RhoPowerIntegrals,
    ScaleCovariance, TAIL_TOL,
};
pub use hermite::{default_series, g_coeffs, g_norm_sq, HermiteSeries, DEFAULT_N_MAX};
pub use spectral::{
    power_cos_tail, rho_h, rho_h_time_domain, spectral_variance, spectral_variance_fourier,
    spectral_variance_time_domain, Order, SpectralGrid, SpectralVariance, CROSS_METHOD_TOL,
};

use crate::fbm::{v2h_sq, HurstParam};
use crate::kernel::Kernel;
use crate::Result;
use alloc::vec::Vec;

/// Which evaluations back a [`SpectralConstants`] record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fourier,
    TimeDomain,
    Both,
}

/// Single-scale constants for one `(h, kernel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConstants {
    pub h: HurstParam,
    pub kernel: Kernel,
    pub v2h_sq: f64,
    pub sigma2h_sq: f64,
    pub sigma2h_sq_time_domain: f64,
    pub sigma_tilde2h_sq: f64,
    pub sigma_tilde2h_sq_time_domain: f64,
    /// `(x, ρ_H(x))` for `x ≥ 0` (the function is even).
    pub rho_h_table: Vec<(f64, f64)>,
    pub method: Method,
}

impl SpectralConstants {
    /// Both spectral variances by both methods and `ρ_H` on `[0, x_max]`.
    pub fn compute(h: HurstParam, kernel: Kernel, x_max: f64, step: f64) -> Result<SpectralConstants> {
        let s2 = spectral_variance(Order::Second, h, kernel)?;
        let s1 = spectral_variance(Order::First, h, kernel)?;
        let n = (x_max / step).round() as usize;
        let rho_h_table = (0..=n)
            .map(|i| {
                let x = i as f64 * step;
                rho_h_time_domain(x, 1.0, 1.0, h, kernel, s2.time_domain).map(|r| (x, r))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralConstants {
            h,
            kernel,
            v2h_sq: v2h_sq(h),
            sigma2h_sq: s2.fourier,
            sigma2h_sq_time_domain: s2.time_domain,
            sigma_tilde2h_sq: s1.fourier,
            sigma_tilde2h_sq_time_domain: s1.time_domain,
            rho_h_table,
            method: Method::Both,
        })
    }
}
