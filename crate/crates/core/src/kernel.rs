//! Smoothing kernels and the convolution derivatives of grid processes.
//!
//! A kernel `φ` is a continuous, compactly supported, piecewise-polynomial
//! density. Its derivatives are kept as measures (polynomial pieces plus Dirac
//! atoms) so that the triangular kernel's second derivative
//! `δ_{-2} - 2δ_{-1} + δ_0` is represented exactly.
//!
//! Fourier convention: `φ̂(x) = ∫ e^{ixt} φ(t) dt`.
//!
//! Convolutions are computed against the piecewise-linear interpolant of the
//! grid process: with `ε = m·dt`, the tap attached to node `s_j = j/m` is
//! `∫ φ^{(r)}(s) Λ_j(s) ds` for the tent `Λ_j` centred at `s_j`. Integrating
//! by parts, the order-2 tap is `m (φ(s_{j-1}) - 2φ(s_j) + φ(s_{j+1}))`, so
//! affine paths are annihilated exactly and the triangular kernel reproduces
//! `ε² Ẍ_ε(u) = X(u+2ε) - 2X(u+ε) + X(u)` at every node.

use crate::fbm::{steps_exact, HurstParam, Process};
use crate::quad::GaussLegendre;
use crate::{Error, Result};
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Polynomial `Σ coeffs[k] t^k` restricted to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl PolyPiece {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> PolyPiece {
        let coeffs = if self.coeffs.len() <= 1 {
            vec![0.0]
        } else {
            self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
        };
        PolyPiece { lo: self.lo, hi: self.hi, coeffs }
    }

    /// Coefficients of the same polynomial expanded around `center`.
    pub fn taylor_at(&self, center: f64) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        let n = c.len();
        // repeated synthetic division
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += center * c[j + 1];
            }
        }
        c
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Signed measure made of polynomial densities and point masses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelMeasure {
    pub pieces: Vec<PolyPiece>,
    pub atoms: Vec<(f64, f64)>,
}

impl KernelMeasure {
    /// Distributional derivative; only defined while there are no atoms.
    pub fn derivative(&self) -> Result<KernelMeasure> {
        if !self.atoms.is_empty() {
            return Err(Error::Domain("cannot differentiate a measure with point masses".into()));
        }
        let pieces: Vec<PolyPiece> = self.pieces.iter().map(PolyPiece::derivative).collect();
        // jumps of the density become atoms
        let mut points: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut atoms = Vec::new();
        for &t in &points {
            let left: f64 = self.pieces.iter().filter(|p| (p.hi - t).abs() < 1e-12).map(|p| p.eval(t)).sum();
            let right: f64 = self.pieces.iter().filter(|p| (p.lo - t).abs() < 1e-12).map(|p| p.eval(t)).sum();
            let jump = right - left;
            if jump.abs() > 1e-12 {
                atoms.push((t, jump));
            }
        }
        Ok(KernelMeasure { pieces, atoms })
    }

    /// Pointwise density value; at a junction of two pieces the average of the
    /// one-sided values. Atoms are not visible pointwise.
    pub fn density(&self, t: f64) -> f64 {
        let (sum, count) = self
            .pieces
            .iter()
            .filter(|p| t >= p.lo - 1e-14 && t <= p.hi + 1e-14)
            .fold((0.0, 0usize), |(s, c), p| (s + p.eval(t), c + 1));
        if count == 0 { 0.0 } else { sum / count as f64 }
    }

    /// `∫ f dμ`, exact for polynomial `f` of moderate degree.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let gl = GaussLegendre::new(12);
        let pieces: f64 = self.pieces.iter().map(|p| gl.integrate(|t| p.eval(t) * f(t), p.lo, p.hi)).sum();
        pieces + self.atoms.iter().map(|(t, m)| m * f(*t)).sum::<f64>()
    }

    /// Points where the measure is not smooth (piece ends and atoms).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        pts.extend(self.atoms.iter().map(|a| a.0));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }
}

/// Built-in smoothing kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    /// `1_{[-1,0]} * 1_{[-1,0]}`: the hat `1 - |t+1|` on `[-2, 0]`.
    SecondDifference,
    /// Triweight `(35/32)(1 - t²)³` on `[-1, 1]`.
    C2Bump,
}

impl Kernel {
    pub const ALL: [Kernel; 2] = [Kernel::SecondDifference, Kernel::C2Bump];

    pub fn builtin(name: &str) -> Result<Kernel> {
        match name {
            "second_difference" => Ok(Kernel::SecondDifference),
            "c2_bump" => Ok(Kernel::C2Bump),
            other => Err(Error::Unknown { kind: "kernel", name: other.to_string() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::SecondDifference => "second_difference",
            Kernel::C2Bump => "c2_bump",
        }
    }

    pub fn support(self) -> (f64, f64) {
        match self {
            Kernel::SecondDifference => (-2.0, 0.0),
            Kernel::C2Bump => (-1.0, 1.0),
        }
    }

    pub fn is_c2_density(self) -> bool {
        matches!(self, Kernel::C2Bump)
    }

    /// Smallest admissible `ε/dt` ratio.
    pub fn min_steps(self) -> usize {
        match self {
            Kernel::SecondDifference => 1,
            Kernel::C2Bump => 16,
        }
    }

    /// The kernel itself as a measure (order 0) or its derivatives.
    pub fn measure(self, order: usize) -> KernelMeasure {
        let base = match self {
            Kernel::SecondDifference => KernelMeasure {
                pieces: vec![
                    PolyPiece { lo: -2.0, hi: -1.0, coeffs: vec![2.0, 1.0] },
                    PolyPiece { lo: -1.0, hi: 0.0, coeffs: vec![0.0, -1.0] },
                ],
                atoms: vec![],
            },
            Kernel::C2Bump => {
                let a = 35.0 / 32.0;
                KernelMeasure {
                    pieces: vec![PolyPiece {
                        lo: -1.0,
                        hi: 1.0,
                        coeffs: vec![a, 0.0, -3.0 * a, 0.0, 3.0 * a, 0.0, -a],
                    }],
                    atoms: vec![],
                }
            }
        };
        let mut m = base;
        for _ in 0..order {
            m = m.derivative().expect("built-in kernels are continuous up to order 1");
        }
        m
    }

    pub fn eval(self, t: f64) -> f64 {
        self.measure(0).density(t)
    }

    pub fn eval_d1(self, t: f64) -> f64 {
        self.measure(1).density(t)
    }

    /// Absolutely continuous part of `φ̈` (the triangular kernel's is zero).
    pub fn eval_d2(self, t: f64) -> f64 {
        self.measure(2).density(t)
    }

    /// Symmetry centre `κ`: `φ(κ + t) = φ(κ - t)`.
    pub fn center(self) -> f64 {
        match self {
            Kernel::SecondDifference => -1.0,
            Kernel::C2Bump => 0.0,
        }
    }

    /// Real, even amplitude `A` with `φ̂(x) = e^{iκx} A(x)`.
    pub fn amplitude(self, x: f64) -> f64 {
        match self {
            Kernel::SecondDifference => {
                let half = 0.5 * x;
                let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
                sinc * sinc
            }
            Kernel::C2Bump => fourier_of_measure(&self.measure(0), x).re,
        }
    }

    /// `φ̂(x) = ∫ e^{ixt} φ(t) dt`.
    pub fn fourier(self, x: f64) -> Complex64 {
        Complex64::new(0.0, self.center() * x).exp() * self.amplitude(x)
    }

    /// Convolution taps for derivative `order` at `ε = m·dt`: pairs
    /// `(k, w)` meaning `X^{(order)}_ε(t_i) += w · X(t_{i-k})` before the
    /// `ε^{-order}` scaling.
    pub fn taps(self, order: usize, m: usize) -> Vec<(isize, f64)> {
        let (lo, hi) = self.support();
        let mf = m as f64;
        let (klo, khi) = ((lo * mf).round() as isize, (hi * mf).round() as isize);
        let phi = |s: f64| if s < lo || s > hi { 0.0 } else { self.eval(s) };
        let gl = GaussLegendre::new(8);
        (klo..=khi)
            .map(|k| {
                let s = k as f64 / mf;
                let h = 1.0 / mf;
                let w = match order {
                    0 => {
                        // ∫ φ(s') Λ_k(s') ds'
                        let left = gl.integrate(|u| phi(u) * (u - (s - h)) * mf, s - h, s);
                        let right = gl.integrate(|u| phi(u) * ((s + h) - u) * mf, s, s + h);
                        left + right
                    }
                    1 => {
                        let right = gl.integrate(phi, s, s + h);
                        let left = gl.integrate(phi, s - h, s);
                        mf * (right - left)
                    }
                    2 => mf * (phi(s - h) - 2.0 * phi(s) + phi(s + h)),
                    _ => panic!("derivative order {order} not supported"),
                };
                (k, w)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect()
    }
}

/// `∫ e^{ixt} μ(dt)` for a piecewise-polynomial measure (atoms included).
///
/// Pieces use repeated integration by parts once `|x|` times the piece width
/// is large (exact, no cancellation there) and Gauss–Legendre otherwise.
pub fn fourier_of_measure(measure: &KernelMeasure, x: f64) -> Complex64 {
    let mut acc: Complex64 =
        measure.atoms.iter().map(|(t, m)| Complex64::new(0.0, x * t).exp() * *m).sum();
    for p in &measure.pieces {
        let width = p.hi - p.lo;
        if x.abs() * width >= 2.0 * (p.degree() as f64 + 2.0) {
            // ∫ p e^{ixt} = [e^{ixt} Σ_k (-1)^k p^{(k)}(t) / (ix)^{k+1}]
            let ix = Complex64::new(0.0, x);
            let mut d = p.clone();
            let mut pow = ix;
            let mut sign = 1.0;
            for _ in 0..=p.degree() {
                let at_hi = Complex64::new(0.0, x * p.hi).exp() * d.eval(p.hi);
                let at_lo = Complex64::new(0.0, x * p.lo).exp() * d.eval(p.lo);
                acc += (at_hi - at_lo) * sign / pow;
                d = d.derivative();
                pow *= ix;
                sign = -sign;
            }
        } else {
            let gl = GaussLegendre::new(10);
            let panels = (x.abs() * width / 2.0).ceil() as usize + 1;
            let re = gl.composite(|t| p.eval(t) * (x * t).cos(), p.lo, p.hi, panels);
            let im = gl.composite(|t| p.eval(t) * (x * t).sin(), p.lo, p.hi, panels);
            acc += Complex64::new(re, im);
        }
    }
    acc
}

/// Which convolution derivatives to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orders {
    pub value: bool,
    pub first: bool,
    pub second: bool,
}

impl Orders {
    pub const ALL: Orders = Orders { value: true, first: true, second: true };
    pub const SECOND: Orders = Orders { value: false, first: false, second: true };
    pub const VALUE_AND_SECOND: Orders = Orders { value: true, first: false, second: true };
    pub const VALUE_AND_FIRST: Orders = Orders { value: true, first: true, second: false };
}

/// `X_ε`, `Ẋ_ε`, `Ẍ_ε` on the inner grid `[0, 1]` of the source process.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedProcess {
    pub eps: f64,
    pub dt: f64,
    /// `ε / dt`.
    pub steps: usize,
    pub kernel: Kernel,
    pub x_eps: Option<Vec<f64>>,
    pub dx_eps: Option<Vec<f64>>,
    pub ddx_eps: Option<Vec<f64>>,
}

impl SmoothedProcess {
    pub fn len(&self) -> usize {
        [&self.x_eps, &self.dx_eps, &self.ddx_eps].iter().find_map(|v| v.as_ref().map(Vec::len)).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inner-grid times `0, dt, …, 1`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn value(&self) -> Result<&[f64]> {
        self.x_eps.as_deref().ok_or_else(|| missing("X_ε (order 0)"))
    }

    pub fn first(&self) -> Result<&[f64]> {
        self.dx_eps.as_deref().ok_or_else(|| missing("Ẋ_ε (order 1)"))
    }

    pub fn second(&self) -> Result<&[f64]> {
        self.ddx_eps.as_deref().ok_or_else(|| missing("Ẍ_ε (order 2)"))
    }

    /// Trapezoid integral over `[0, 1]` of `f(i)` evaluated on the inner grid.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.len();
        let vals: Vec<f64> = (0..n).map(f).collect();
        crate::stats::trapezoid(&vals, self.dt)
    }
}

fn missing(what: &str) -> Error {
    Error::Domain(format!("smoothed process lacks {what}"))
}

/// Regularizes `process` with `φ_ε = ε^{-1} φ(·/ε)` and returns the requested
/// derivatives on the inner grid `[0, 1]`.
pub fn smooth(process: &Process, kernel: Kernel, eps: f64, orders: Orders) -> Result<SmoothedProcess> {
    let dt = process.dt;
    let steps = steps_exact(eps, dt)
        .filter(|&m| m >= 1)
        .ok_or_else(|| Error::Grid(format!("eps = {eps} is not an integer multiple of dt = {dt}")))?;
    if steps < kernel.min_steps() {
        return Err(Error::Grid(format!(
            "kernel {} needs eps >= {}·dt, got eps = {steps}·dt",
            kernel.name(),
            kernel.min_steps()
        )));
    }
    let zero = process.zero_index()?;
    let per_unit =
        steps_exact(1.0, dt).ok_or_else(|| Error::Grid(format!("dt = {dt} does not divide [0, 1]")))?;
    let (lo, hi) = kernel.support();
    let first_needed = zero as isize - (hi * steps as f64).round() as isize;
    let last_needed = (zero + per_unit) as isize - (lo * steps as f64).round() as isize;
    if first_needed < 0 || last_needed >= process.values.len() as isize {
        return Err(Error::Grid(format!(
            "convolution window [{}, {}] exceeds the source grid [{}, {}]",
            -hi * eps,
            1.0 - lo * eps,
            process.t0,
            process.time(process.values.len() - 1)
        )));
    }
    let run = |order: usize| -> Vec<f64> {
        let taps = kernel.taps(order, steps);
        let scale = eps.powi(-(order as i32));
        (0..=per_unit)
            .map(|i| {
                let idx = (zero + i) as isize;
                taps.iter().map(|(k, w)| w * process.values[(idx - k) as usize]).sum::<f64>() * scale
            })
            .collect()
    };
    Ok(SmoothedProcess {
        eps,
        dt,
        steps,
        kernel,
        x_eps: orders.value.then(|| run(0)),
        dx_eps: orders.first.then(|| run(1)),
        ddx_eps: orders.second.then(|| run(2)),
    })
}

/// `Z_ε = ε^{2-H} b̈^ε_H / σ_{2H}` from a smoothed fBm path.
pub fn z_process(smoothed: &SmoothedProcess, h: HurstParam, sigma2h_sq: f64) -> Result<Vec<f64>> {
    let dd = smoothed.second()?;
    let scale = smoothed.eps.powf(2.0 - h.value()) / sigma2h_sq.sqrt();
    Ok(dd.iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_process(f: impl Fn(f64) -> f64, eps_max: f64, dt: f64) -> Process {
        let g = crate::fbm::Grid::covering_unit_interval(eps_max, dt).unwrap();
        Process { t0: g.t0, dt, values: (0..g.n).map(|i| f(g.time(i))).collect() }
    }

    #[test]
    fn unknown_kernel_name() {
        assert!(Kernel::builtin("gauss").is_err());
        assert_eq!(Kernel::builtin("c2_bump").unwrap(), Kernel::C2Bump);
    }

    #[test]
    fn densities_integrate_to_one() {
        for k in Kernel::ALL {
            let m0 = k.measure(0);
            assert!((m0.integrate(|_| 1.0) - 1.0).abs() < 1e-12, "{k:?}");
            let m2 = k.measure(2);
            assert!(m2.integrate(|_| 1.0).abs() < 1e-12);
            assert!(m2.integrate(|t| t).abs() < 1e-12);
            let (lo, hi) = k.support();
            for j in 0..=100 {
                let t = lo + (hi - lo) * j as f64 / 100.0;
                assert!(k.eval(t) >= 0.0);
            }
        }
    }

    #[test]
    fn triangular_second_derivative_is_three_atoms() {
        let m2 = Kernel::SecondDifference.measure(2);
        assert!(m2.pieces.iter().all(|p| p.coeffs.iter().all(|c| *c == 0.0)));
        assert_eq!(m2.atoms, vec![(-2.0, 1.0), (-1.0, -2.0), (0.0, 1.0)]);
    }

    #[test]
    fn bump_vanishes_to_second_order_at_ends() {
        for t in [-1.0, 1.0] {
            assert!(Kernel::C2Bump.eval(t).abs() < 1e-15);
            assert!(Kernel::C2Bump.eval_d1(t).abs() < 1e-14);
            assert!(Kernel::C2Bump.eval_d2(t).abs() < 1e-13);
        }
        assert!(Kernel::C2Bump.measure(2).atoms.is_empty());
    }

    #[test]
    fn fourier_at_zero_and_bounded() {
        for k in Kernel::ALL {
            assert!((k.fourier(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            for x in [0.3, 1.0, 5.0, 17.0, 60.0] {
                assert!(k.fourier(x).norm() <= 1.0 + 1e-12);
            }
        }
        // triangular closed form against quadrature of the same density
        for x in [0.5, 3.0, 40.0] {
            let q = fourier_of_measure(&Kernel::SecondDifference.measure(0), x);
            assert!((q - Kernel::SecondDifference.fourier(x)).norm() < 1e-12);
        }
        // both branches of the piece transform agree near the switch
        let m = Kernel::C2Bump.measure(0);
        let gl = GaussLegendre::new(10);
        for x in [7.9, 8.1, 25.0] {
            let re = gl.composite(|t| Kernel::C2Bump.eval(t) * (x * t).cos(), -1.0, 1.0, 64);
            assert!((fourier_of_measure(&m, x).re - re).abs() < 1e-13, "{x}");
            assert!(fourier_of_measure(&m, x).im.abs() < 1e-13);
        }
        // second-derivative measure: φ̈^(x) = -x² φ̂(x)
        for k in Kernel::ALL {
            for x in [0.7, 9.0] {
                let lhs = fourier_of_measure(&k.measure(2), x);
                assert!((lhs + k.fourier(x) * x * x).norm() < 1e-11, "{k:?} {x}");
            }
        }
    }

    #[test]
    fn bump_fourier_tail_decays_like_x_minus_four_or_faster() {
        let c = Kernel::C2Bump.fourier(10.0).norm_sqr() * 10f64.powi(4);
        let c100 = Kernel::C2Bump.fourier(100.0).norm_sqr() * 100f64.powi(4);
        assert!(c100 <= c.max(1.0));
    }

    #[test]
    fn constant_and_affine_paths() {
        let dt = 1.0 / 1024.0;
        for k in Kernel::ALL {
            let eps = 16.0 * dt;
            let c = grid_process(|_| 2.5, eps, dt);
            let s = smooth(&c, k, eps, Orders::ALL).unwrap();
            assert!(s.value().unwrap().iter().all(|v| (v - 2.5).abs() < 1e-12));
            assert!(s.second().unwrap().iter().all(|v| v.abs() < 1e-6));
            assert!(s.first().unwrap().iter().all(|v| v.abs() < 1e-8));
            let lin = grid_process(|t| t, eps, dt);
            let s = smooth(&lin, k, eps, Orders::ALL).unwrap();
            assert!(s.second().unwrap().iter().all(|v| v.abs() < 1e-6), "{k:?}");
            assert!(s.first().unwrap().iter().all(|v| (v - 1.0).abs() < 1e-9), "{k:?}");
        }
    }

    #[test]
    fn second_difference_identity_on_quadratic() {
        let dt = 1.0 / 512.0;
        for m in [1usize, 4] {
            let eps = m as f64 * dt;
            let p = grid_process(|t| t * t, eps, dt);
            let s = smooth(&p, Kernel::SecondDifference, eps, Orders::SECOND).unwrap();
            for v in s.second().unwrap() {
                assert!((v * eps * eps - 2.0 * eps * eps).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn window_and_multiple_checks() {
        let dt = 1.0 / 256.0;
        let p = grid_process(|t| t, 4.0 * dt, dt);
        assert!(smooth(&p, Kernel::SecondDifference, 2.5 * dt, Orders::SECOND).is_err());
        assert!(smooth(&p, Kernel::SecondDifference, 8.0 * dt, Orders::SECOND).is_err());
        assert!(smooth(&p, Kernel::C2Bump, 4.0 * dt, Orders::SECOND).is_err());
        let s = smooth(&p, Kernel::SecondDifference, 4.0 * dt, Orders::SECOND).unwrap();
        assert!(s.value().is_err());
        assert_eq!(s.len(), 257);
    }
}
