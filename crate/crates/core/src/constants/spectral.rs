//! Spectral variances `σ²_{2H}`, `σ̃²_{2H}` and the lag correlation `ρ_H`.

use super::pair::pair_integral;
use crate::fbm::{v2h_sq, HurstParam};
use crate::kernel::Kernel;
use crate::quad::{adaptive, adaptive_semi_infinite, adaptive_with_breaks, filon_panels};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Maximum relative disagreement tolerated between the two methods.
pub const CROSS_METHOD_TOL: f64 = 1e-5;

const BODY_END: f64 = 1.0;

fn spectrum_end(kernel: Kernel) -> f64 {
    match kernel {
        Kernel::SecondDifference => 2000.0,
        // |φ̂|² ~ x^{-8}: the remainder beyond is below 1e-11
        Kernel::C2Bump => 1000.0,
    }
}

/// Derivative order of the regularized process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn from_int(order: usize) -> Result<Order> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            o => Err(Error::arg("order", format!("must be 1 or 2, got {o}"))),
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    /// Power of `|x|` in the spectral integrand for Hurst index `h`.
    fn exponent(self, h: f64) -> f64 {
        match self {
            Order::First => 1.0 - 2.0 * h,
            Order::Second => 3.0 - 2.0 * h,
        }
    }
}

/// `|φ̂|²` tabulated once per kernel on a composite Gauss–Legendre grid over
/// `[1, X]`, so that the spectral variance can be re-evaluated cheaply at any `h`.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    kernel: Kernel,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    power: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(kernel: Kernel) -> SpectralGrid {
        let (gx, gw) = crate::quad::gauss_legendre(10);
        let end = spectrum_end(kernel);
        let panel = 0.5;
        let panels = ((end - BODY_END) / panel).round() as usize;
        let mut nodes = Vec::with_capacity(panels * gx.len());
        let mut weights = Vec::with_capacity(panels * gx.len());
        for p in 0..panels {
            let mid = BODY_END + (p as f64 + 0.5) * panel;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * panel * x);
                weights.push(0.5 * panel * w);
            }
        }
        let power = nodes.iter().map(|&x| kernel.amplitude(x).powi(2)).collect();
        SpectralGrid { kernel, nodes, weights, power }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// `(1/2π) ∫ |x|^{a} |φ̂(x)|² dx` with `a` set by `order`.
    pub fn variance(&self, order: Order, h: HurstParam) -> Result<f64> {
        let a = order.exponent(h.value());
        let kernel = self.kernel;
        // ∫_0^1 x^a f = 1/(a+1) + ∫_0^1 x^a (f - 1), f = |φ̂|², f(0) = 1
        let body = adaptive(
            |x| if x == 0.0 { 0.0 } else { x.powf(a) * (kernel.amplitude(x).powi(2) - 1.0) },
            0.0,
            BODY_END,
            1e-15,
            1e-14,
            500,
        )
        .require("spectral body")?
            + 1.0 / (a + 1.0);
        let middle: f64 =
            self.nodes.iter().zip(&self.weights).zip(&self.power).map(|((x, w), p)| w * x.powf(a) * p).sum();
        let tail = match kernel {
            Kernel::SecondDifference => {
                // sinc⁴(x/2) = (16/x⁴)(3/8 - cos x / 2 + cos 2x / 8)
                let q = 4.0 - a;
                let end = spectrum_end(kernel);
                16.0 * (0.375 * power_cos_tail(q, 0.0, end)? - 0.5 * power_cos_tail(q, 1.0, end)?
                    + 0.125 * power_cos_tail(q, 2.0, end)?)
            }
            Kernel::C2Bump => 0.0,
        };
        Ok((body + middle + tail) / PI)
    }
}

/// `∫_Y^∞ y^{-q} cos(ω y) dy` for `q > 1` (or `ω ≠ 0`, `q > 0`), through the
/// rotation `y = Y + i t` of the contour, where the integrand decays like `e^{-ωt}`.
pub fn power_cos_tail(q: f64, omega: f64, y0: f64) -> Result<f64> {
    let w = omega.abs();
    if w < 1e-12 {
        if q <= 1.0 {
            return Err(Error::Domain(format!("∫ y^-{q} diverges")));
        }
        return Ok(y0.powf(1.0 - q) / (q - 1.0));
    }
    let f = |t: f64| Complex64::new(y0, t).powf(-q) * (-w * t).exp();
    let scale = 1.0 / w;
    let tol = 1e-16 * y0.powf(-q) / w;
    let re = adaptive_semi_infinite(|t| f(t).re, 0.0, scale, tol, 1e-13, 1000).require("power tail")?;
    let im = adaptive_semi_infinite(|t| f(t).im, 0.0, scale, tol, 1e-13, 1000).require("power tail")?;
    let v = Complex64::new(0.0, 1.0) * Complex64::new(0.0, w * y0).exp() * Complex64::new(re, im);
    Ok(v.re)
}

/// Both evaluations of a spectral variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralVariance {
    pub fourier: f64,
    pub time_domain: f64,
}

impl SpectralVariance {
    /// The primary (Fourier) value.
    pub fn value(&self) -> f64 {
        self.fourier
    }

    pub fn relative_gap(&self) -> f64 {
        (self.fourier - self.time_domain).abs() / self.fourier.abs()
    }
}

pub fn spectral_variance_fourier(order: Order, h: HurstParam, kernel: Kernel) -> Result<f64> {
    SpectralGrid::new(kernel).variance(order, h)
}

/// `-(v²_{2H}/2) ∬ φ^{(r)}(u) φ^{(r)}(v) |u - v|^{2h} du dv`.
pub fn spectral_variance_time_domain(order: Order, h: HurstParam, kernel: Kernel) -> Result<f64> {
    let m = kernel.measure(order.as_int());
    let p = pair_integral(&m, &m, 0.0, 1.0, 1.0, 2.0 * h.value())?;
    Ok(-0.5 * v2h_sq(h) * p)
}

/// Fourier and time-domain values; fails when they disagree beyond [`CROSS_METHOD_TOL`].
pub fn spectral_variance(order: Order, h: HurstParam, kernel: Kernel) -> Result<SpectralVariance> {
    let sv = SpectralVariance {
        fourier: spectral_variance_fourier(order, h, kernel)?,
        time_domain: spectral_variance_time_domain(order, h, kernel)?,
    };
    if !(sv.fourier > 0.0 && sv.time_domain > 0.0) || sv.relative_gap() > CROSS_METHOD_TOL {
        return Err(Error::Numerical(format!(
            "spectral variance (order {}, h = {}, {}): Fourier {} vs time domain {}",
            order.as_int(),
            h.value(),
            kernel.name(),
            sv.fourier,
            sv.time_domain
        )));
    }
    Ok(sv)
}

/// `ρ_H(x, b, c)` from the covariance of the fBm, i.e.
/// `(bc)^{-H} (-v²/2) ∬ φ̈(s) φ̈(r) |x - b s + c r|^{2H} / σ²_{2H}`.
pub fn rho_h_time_domain(x: f64, b: f64, c: f64, h: HurstParam, kernel: Kernel, sigma2h_sq: f64) -> Result<f64> {
    check_scales(b, c)?;
    let m = kernel.measure(2);
    let p = pair_integral(&m, &m, x, b, c, 2.0 * h.value())?;
    Ok((b * c).powf(-h.value()) * (-0.5 * v2h_sq(h)) * p / sigma2h_sq)
}

fn check_scales(b: f64, c: f64) -> Result<()> {
    if !(b > 0.0 && c > 0.0 && b.is_finite() && c.is_finite()) {
        return Err(Error::arg("scales", format!("b and c must be positive, got ({b}, {c})")));
    }
    Ok(())
}

const RHO_FILON_START: f64 = 50.0;
const RHO_FILON_STEP: f64 = 0.02;

/// `ρ_H(x, b, c) = ((bc)^{2-H} / (2π σ²_{2H})) ∫ |y|^{3-2H} e^{ixy} φ̂(-by) φ̂(cy) dy`.
///
/// The integrand at `-y` is the conjugate of the one at `y`, so the integral
/// is `2 Re ∫_0^∞`. Writing `φ̂(x) = e^{iκx}A(x)` folds the kernel phases into
/// the frequency `ω = x + κ(c - b)`. Adaptive Gauss–Kronrod below `|y| = 50`,
/// Filon panels above, and an exact power-cosine tail for the triangular kernel.
pub fn rho_h(x: f64, b: f64, c: f64, h: HurstParam, kernel: Kernel, sigma2h_sq: f64) -> Result<f64> {
    check_scales(b, c)?;
    let hv = h.value();
    let p = 3.0 - 2.0 * hv;
    let omega = x + kernel.center() * (c - b);
    let f = |y: f64| if y == 0.0 { 0.0 } else { y.powf(p) * kernel.amplitude(b * y) * kernel.amplitude(c * y) };
    let breaks: Vec<f64> = (0..=RHO_FILON_START as usize).map(|v| v as f64).collect();
    let low = adaptive_with_breaks(|y| f(y) * (omega * y).cos(), &breaks, 1e-15, 1e-13, 4000).require("ρ_H body")?;
    let end = spectrum_end(kernel);
    let n = ((end - RHO_FILON_START) / RHO_FILON_STEP).round() as usize;
    let n = n + n % 2;
    let step = (end - RHO_FILON_START) / n as f64;
    let samples: Vec<Complex64> =
        (0..=n).map(|i| Complex64::new(f(RHO_FILON_START + i as f64 * step), 0.0)).collect();
    let mid = filon_panels(&samples, RHO_FILON_START, end, omega).re;
    let tail = match kernel {
        Kernel::SecondDifference => {
            // A(by)A(cy) = 16 sin²(by/2) sin²(cy/2) / (b²c²y⁴); expand into cosines
            let q = 4.0 - p;
            let mut terms: Vec<(f64, f64)> = alloc::vec![(0.25, omega)];
            for (coef, nu) in [(-0.125, b), (-0.125, c), (0.0625, b - c), (0.0625, b + c)] {
                terms.push((coef, nu - omega));
                terms.push((coef, nu + omega));
            }
            let mut acc = 0.0;
            for (coef, nu) in terms {
                acc += coef * power_cos_tail(q, nu, end)?;
            }
            16.0 / (b * b * c * c) * acc
        }
        Kernel::C2Bump => 0.0,
    };
    let integral = 2.0 * (low + mid + tail);
    Ok((b * c).powf(2.0 - hv) * integral / (2.0 * PI * sigma2h_sq))
}
