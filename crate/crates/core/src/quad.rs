//! Quadrature rules: Gauss–Legendre panels, adaptive Gauss–Kronrod (7/15),
//! semi-infinite mapping, Filon-type panels for `∫ f(y) e^{iωy} dy`, and
//! probabilists' Gauss–Hermite nodes.

use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

impl Integral {
    /// Turns a non-converged estimate into a [`Error::Numerical`].
    pub fn require(self, what: &str) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Numerical(format!(
                "quadrature for {what} did not converge (estimate {}, error {})",
                self.value, self.abs_error
            )))
        }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Fixed Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the sub-interval with the largest error estimate until the summed
/// error is below `max(abs_tol, rel_tol·|I|)` or `max_intervals` is reached.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    if a == b {
        return Integral { value: 0.0, abs_error: 0.0, converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= max_intervals {
            return Integral { value: total, abs_error: err, converged: false };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // interval collapsed to floating point resolution
            parts.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated rounding from the incremental updates
    let value = parts.iter().map(|p| p.2).sum();
    let abs_error = parts.iter().map(|p| p.3).sum();
    Integral { value, abs_error, converged: true }
}

/// Adaptive integration over consecutive sub-intervals split at `breaks`.
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    let mut out = Integral { value: 0.0, abs_error: 0.0, converged: true };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let r = adaptive(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, max_intervals);
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.converged &= r.converged;
    }
    out
}

/// `∫_a^∞ f` through the map `y = a + s u/(1-u)`, `u ∈ [0,1)`.
pub fn adaptive_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    adaptive(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - u;
            let y = a + scale * u / one_minus;
            let v = f(y) * scale / (one_minus * one_minus);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_intervals,
    )
}

/// Moments `∫_{-1}^{1} s^k e^{iθs} ds` for `k = 0, 1, 2`.
fn filon_moments(theta: f64) -> [Complex64; 3] {
    if theta.abs() < 0.5 {
        // even/odd power series, converges quickly for |θ| < 1/2
        let (mut c0, mut s1, mut c2) = (0.0, 0.0, 0.0);
        let mut term = 1.0; // θ^j / j!
        for j in 0..24 {
            let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if j % 2 == 0 {
                c0 += sign * term * 2.0 / (j as f64 + 1.0);
                c2 += sign * term * 2.0 / (j as f64 + 3.0);
            } else {
                s1 += sign * term * 2.0 / (j as f64 + 2.0);
            }
            term *= theta / (j as f64 + 1.0);
        }
        return [Complex64::new(c0, 0.0), Complex64::new(0.0, s1), Complex64::new(c2, 0.0)];
    }
    let (s, c) = (theta.sin(), theta.cos());
    let t2 = theta * theta;
    [
        Complex64::new(2.0 * s / theta, 0.0),
        Complex64::new(0.0, 2.0 * (s - theta * c) / t2),
        Complex64::new(2.0 * ((t2 - 2.0) * s + 2.0 * theta * c) / (t2 * theta), 0.0),
    ]
}

/// Filon-type composite rule for `∫_a^b f(y) e^{iωy} dy` given samples of `f`.
///
/// `values` holds `f` at `2p + 1` equispaced nodes spanning `[a, b]`; on each
/// pair of panels `f` is replaced by its quadratic interpolant and the
/// oscillatory factor is integrated exactly, so the node count only has to
/// resolve `f`, not `e^{iωy}`.
pub fn filon_panels(values: &[Complex64], a: f64, b: f64, omega: f64) -> Complex64 {
    let m = values.len();
    assert!(m >= 3 && m % 2 == 1, "Filon panels need an odd number (>=3) of samples");
    let panels = (m - 1) / 2;
    let h = (b - a) / (2 * panels) as f64;
    let mu = filon_moments(omega * h);
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let (fm, f0, fp) = (values[2 * p], values[2 * p + 1], values[2 * p + 2]);
        let mid = a + (2 * p + 1) as f64 * h;
        // f(mid + h s) ≈ f0 + s (fp - fm)/2 + s² (fp - 2 f0 + fm)/2
        let local = f0 * mu[0] + (fp - fm) * 0.5 * mu[1] + (fp - f0 * 2.0 + fm) * 0.5 * mu[2];
        let phase = Complex64::new(0.0, omega * mid).exp();
        acc += phase * local * h;
    }
    acc
}

/// Probabilists' Gauss–Hermite rule: `E[f(N)] ≈ Σ w_i f(x_i)` for `N ~ N(0,1)`.
///
/// Weights underflow beyond `n = 150`, which is therefore the limit.
pub fn gauss_hermite_prob(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!((1..=150).contains(&n), "Gauss–Hermite order must lie in 1..=150");
    // physicists' roots by Newton on the orthonormal recurrence (largest first),
    // mirrored, then rescaled to the standard normal weight
    let half = (n + 1) / 2;
    let mut phys: Vec<f64> = Vec::with_capacity(half);
    let mut wts: Vec<f64> = Vec::with_capacity(half);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * phys[0],
            3 => 1.91 * z - 0.91 * phys[1],
            _ => 2.0 * z - phys[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        phys.push(z);
        wts.push(2.0 / (pp * pp));
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..half {
        nodes.push(-phys[i] * 2f64.sqrt());
        weights.push(wts[i] / PI.sqrt());
    }
    for i in (0..n - half).rev() {
        nodes.push(phys[i] * 2f64.sqrt());
        weights.push(wts[i] / PI.sqrt());
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;


    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(6);
        let v = gl.integrate(|x| x.powi(11) + 3.0 * x.powi(4) + 1.0, -1.0, 2.0);
        let exact = (2f64.powi(12) - 1.0) / 12.0 + 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x| x.powf(-0.5), 0.0, 1.0, 1e-12, 1e-12, 2000);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn semi_infinite_power_tail() {
        let r = adaptive_semi_infinite(|y| y.powf(-2.5), 3.0, 3.0, 1e-14, 1e-12, 2000);
        let exact = 3f64.powf(-1.5) / 1.5;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn filon_exact_for_quadratics() {
        let (a, b, omega) = (1.0, 4.0, 37.0);
        let n = 7;
        let vals: Vec<Complex64> = (0..n)
            .map(|j| {
                let y = a + (b - a) * j as f64 / (n - 1) as f64;
                Complex64::new(y * y - 2.0 * y, 0.5 * y)
            })
            .collect();
        let got = filon_panels(&vals, a, b, omega);
        let gl = GaussLegendre::new(40);
        let re = gl.composite(|y| (y * y - 2.0 * y) * (omega * y).cos() - 0.5 * y * (omega * y).sin(), a, b, 40);
        let im = gl.composite(|y| (y * y - 2.0 * y) * (omega * y).sin() + 0.5 * y * (omega * y).cos(), a, b, 40);
        assert!((got.re - re).abs() < 1e-12, "{} vs {}", got.re, re);
        assert!((got.im - im).abs() < 1e-12);
    }

    #[test]
    fn filon_small_frequency_series_branch() {
        let vals = [Complex64::new(1.0, 0.0); 5];
        let got = filon_panels(&vals, 0.0, 1.0, 0.3);
        let exact = Complex64::new(0.3f64.sin() / 0.3, (1.0 - 0.3f64.cos()) / 0.3);
        assert!((got - exact).norm() < 1e-14);
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite_prob(20);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-10);
    }
}
