//! Pseudo-diffusions `dX = σ(X) db_H + μ(X) dt` built pathwise from a sampled
//! `b_H`: closed forms for the four explicit models, the flow `X = K(b_H)` for
//! `μ ≡ 0`, the affine-σ family, and an explicit Euler scheme.
//!
//! Every trajectory lives on the grid of the driving path and equals the
//! initial value `c` at negative times.

use crate::fbm::{extend_path, HurstParam, Process};
use crate::{Error, Result};
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Scalar coefficient functions from a small named catalog (`"name:param"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    /// `a`
    Const(f64),
    /// `a x`
    Linear(f64),
    /// `a + sin x`
    SinOffset(f64),
    /// `a tanh x`
    Tanh(f64),
    /// `a (1 + x²)`
    OnePlusSquare(f64),
    /// `a + 1/(1 + x²)`
    LorentzOffset(f64),
}

impl ScalarFn {
    pub const CATALOG: [&'static str; 6] =
        ["const", "linear", "sin_offset", "tanh", "one_plus_square", "lorentz_offset"];

    pub fn parse(text: &str) -> Result<ScalarFn> {
        let (name, param) = text.split_once(':').unwrap_or((text, "1"));
        let a: f64 = param
            .trim()
            .parse()
            .map_err(|_| Error::arg("function", format!("bad parameter in `{text}`")))?;
        match name.trim() {
            "const" => Ok(ScalarFn::Const(a)),
            "linear" => Ok(ScalarFn::Linear(a)),
            "sin_offset" => Ok(ScalarFn::SinOffset(a)),
            "tanh" => Ok(ScalarFn::Tanh(a)),
            "one_plus_square" => Ok(ScalarFn::OnePlusSquare(a)),
            "lorentz_offset" => Ok(ScalarFn::LorentzOffset(a)),
            other => Err(Error::Unknown { kind: "function", name: other.to_string() }),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            ScalarFn::Const(a) => a,
            ScalarFn::Linear(a) => a * x,
            ScalarFn::SinOffset(a) => a + x.sin(),
            ScalarFn::Tanh(a) => a * x.tanh(),
            ScalarFn::OnePlusSquare(a) => a * (1.0 + x * x),
            ScalarFn::LorentzOffset(a) => a + 1.0 / (1.0 + x * x),
        }
    }
}

impl core::fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let (name, a) = match *self {
            ScalarFn::Const(a) => ("const", a),
            ScalarFn::Linear(a) => ("linear", a),
            ScalarFn::SinOffset(a) => ("sin_offset", a),
            ScalarFn::Tanh(a) => ("tanh", a),
            ScalarFn::OnePlusSquare(a) => ("one_plus_square", a),
            ScalarFn::LorentzOffset(a) => ("lorentz_offset", a),
        };
        write!(f, "{name}:{a}")
    }
}

/// Drift form in the affine-σ family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuMode {
    /// `μ(x) = μ`
    Constant,
    /// `μ(x) = μ x`
    Linear,
}

/// A pseudo-diffusion with its coefficients and initial value `c`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `dX = σ db + μ dt`
    Additive { sigma: f64, mu: f64, c: f64 },
    /// `dX = σ db + μX dt`
    OrnsteinUhlenbeck { sigma: f64, mu: f64, c: f64 },
    /// `dX = σX db + μX dt`
    Geometric { sigma: f64, mu: f64, c: f64 },
    /// `dX = σX db + μ dt`, with `μ c ≥ 0`
    Mixed { sigma: f64, mu: f64, c: f64 },
    /// `dX = σ(X) db`
    GeneralMuZero { sigma: ScalarFn, c: f64 },
    /// `dX = (aX + b) db + μ(X) dt`, `a ≠ 0`
    Affine { a: f64, b: f64, mu_mode: MuMode, mu: f64, c: f64 },
    /// Explicit Euler for `dX = σ(X) db + μ(X) dt` (approximate)
    GeneralEuler { sigma: ScalarFn, mu: ScalarFn, c: f64 },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Additive { .. } => "m4",
            ModelSpec::OrnsteinUhlenbeck { .. } => "m5",
            ModelSpec::Geometric { .. } => "m6",
            ModelSpec::Mixed { .. } => "m7",
            ModelSpec::GeneralMuZero { .. } => "general",
            ModelSpec::Affine { .. } => "affine",
            ModelSpec::GeneralEuler { .. } => "euler",
        }
    }

    pub fn initial_value(&self) -> f64 {
        match *self {
            ModelSpec::Additive { c, .. }
            | ModelSpec::OrnsteinUhlenbeck { c, .. }
            | ModelSpec::Geometric { c, .. }
            | ModelSpec::Mixed { c, .. }
            | ModelSpec::GeneralMuZero { c, .. }
            | ModelSpec::Affine { c, .. }
            | ModelSpec::GeneralEuler { c, .. } => c,
        }
    }

    /// Whether the volatility multiplies the state (`σ(x) = σx`), which selects
    /// the multiplicative estimator family.
    pub fn is_multiplicative(&self) -> bool {
        matches!(self, ModelSpec::Geometric { .. } | ModelSpec::Mixed { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Mixed { mu, c, .. } if mu * c < 0.0 => Err(Error::Domain(format!(
                "the mixed model needs μ and c of the same sign, got μ = {mu}, c = {c}"
            ))),
            ModelSpec::Affine { a, .. } if a == 0.0 => Err(Error::arg("a", "must be non-zero")),
            _ => Ok(()),
        }
    }
}

/// A model trajectory; `approximate` marks discretization schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub process: Process,
    pub approximate: bool,
}

/// Builds `X` on the grid of the driving path `b`.
pub fn simulate(spec: &ModelSpec, b: &Process) -> Result<Trajectory> {
    spec.validate()?;
    match spec {
        ModelSpec::GeneralMuZero { sigma, c } => {
            Ok(Trajectory { process: solve_general_mu_zero(*sigma, *c, b, OdeOptions::default())?, approximate: false })
        }
        ModelSpec::Affine { a, b: bb, mu_mode, mu, c } => {
            Ok(Trajectory { process: solve_affine(*a, *bb, *mu_mode, *mu, *c, b)?, approximate: false })
        }
        ModelSpec::GeneralEuler { sigma, mu, c } => {
            Ok(Trajectory { process: solve_general_euler(*sigma, *mu, *c, b)?, approximate: true })
        }
        _ => Ok(Trajectory { process: solve_closed_form(spec, b)?, approximate: false }),
    }
}

/// `∫_0^t f` by the trapezoid rule along the grid, for every grid time `t ≥ 0`
/// (zero at negative times).
fn cumulative_trapezoid(values: &[f64], zero: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in zero + 1..values.len() {
        out[i] = out[i - 1] + 0.5 * dt * (values[i - 1] + values[i]);
    }
    out
}

/// Closed-form solutions of the four explicit models.
pub fn solve_closed_form(spec: &ModelSpec, b: &Process) -> Result<Process> {
    spec.validate()?;
    let zero = b.zero_index()?;
    let dt = b.dt;
    let t = |i: usize| b.time(i);
    let values: Vec<f64> = match *spec {
        ModelSpec::Additive { sigma, mu, c } => {
            b.values.iter().enumerate().map(|(i, bv)| sigma * bv + mu * t(i) + c).collect()
        }
        ModelSpec::OrnsteinUhlenbeck { sigma, mu, c } => {
            let integrand: Vec<f64> =
                b.values.iter().enumerate().map(|(i, bv)| bv * (-mu * t(i)).exp()).collect();
            let cum = cumulative_trapezoid(&integrand, zero, dt);
            b.values
                .iter()
                .enumerate()
                .map(|(i, bv)| sigma * bv + (mu * t(i)).exp() * (sigma * mu * cum[i] + c))
                .collect()
        }
        ModelSpec::Geometric { sigma, mu, c } => {
            b.values.iter().enumerate().map(|(i, bv)| c * (mu * t(i) + sigma * bv).exp()).collect()
        }
        ModelSpec::Mixed { sigma, mu, c } => {
            let integrand: Vec<f64> = b.values.iter().map(|bv| (-sigma * bv).exp()).collect();
            let cum = cumulative_trapezoid(&integrand, zero, dt);
            b.values.iter().zip(&cum).map(|(bv, ci)| (sigma * bv).exp() * (c + mu * ci)).collect()
        }
        _ => {
            return Err(Error::arg("model", format!("{} has no closed form", spec.name())));
        }
    };
    Ok(extend_path(&Process { t0: b.t0, dt, values }, spec.initial_value()))
}

/// Tolerances for [`solve_ode_k`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Local error bound per accepted step.
    pub tol: f64,
    /// `|K|` beyond this is reported as a blow-up.
    pub bound: f64,
    /// Largest step, which also controls the dense-output error.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: 1e-10, bound: 1e12, max_step: 0.005 }
    }
}

/// Dense solution of `K̇ = σ(K)`, `K(0) = c` on `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    /// `(t, K(t), K̇(t))` at accepted steps, increasing in `t`.
    nodes: Vec<(f64, f64, f64)>,
}

impl OdeSolution {
    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0].0, self.nodes[self.nodes.len() - 1].0)
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Cubic Hermite interpolation between accepted steps.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!("K evaluated at {t} outside the solved range [{lo}, {hi}]")));
        }
        let j = self.nodes.partition_point(|n| n.0 <= t).clamp(1, self.nodes.len() - 1);
        let (t0, y0, d0) = self.nodes[j - 1];
        let (t1, y1, d1) = self.nodes[j];
        let h = t1 - t0;
        if h == 0.0 {
            return Ok(y0);
        }
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1)
    }
}

fn rk4_step(f: &impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * h * k1);
    let k3 = f(y + 0.5 * h * k2);
    let k4 = f(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates in one direction from 0 to `target`, step-doubling error control.
fn integrate_towards(
    sigma: &impl Fn(f64) -> f64,
    c: f64,
    target: f64,
    opts: OdeOptions,
) -> Result<Vec<(f64, f64, f64)>> {
    let dir = if target < 0.0 { -1.0 } else { 1.0 };
    let mut t = 0.0f64;
    let mut y = c;
    let mut nodes = vec![(t, y, sigma(y))];
    let mut h = opts.max_step.min(target.abs()).max(1e-6);
    while (target - t) * dir > 1e-15 {
        h = h.min((target - t).abs());
        let full = rk4_step(sigma, y, dir * h);
        let half = rk4_step(sigma, rk4_step(sigma, y, dir * 0.5 * h), dir * 0.5 * h);
        let err = (half - full).abs() / 15.0;
        if !half.is_finite() || half.abs() > opts.bound {
            if h < 1e-12 {
                return Err(Error::BlowUp { time: t + dir * h, bound: opts.bound });
            }
            h *= 0.25;
            continue;
        }
        if err <= opts.tol || h < 1e-12 {
            t += dir * h;
            y = half;
            nodes.push((t, y, sigma(y)));
            let grow = if err == 0.0 { 4.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 4.0) };
            h = (h * grow).min(opts.max_step);
        } else {
            h *= (0.9 * (opts.tol / err).powf(0.2)).clamp(0.1, 0.9);
        }
        if h < 1e-12 {
            return Err(Error::BlowUp { time: t, bound: opts.bound });
        }
    }
    Ok(nodes)
}

/// Solves `K̇ = σ(K)`, `K(0) = c` forward and backward so that `[lo, hi]` is covered.
pub fn solve_ode_k(sigma: impl Fn(f64) -> f64, c: f64, lo: f64, hi: f64, opts: OdeOptions) -> Result<OdeSolution> {
    if lo > hi {
        return Err(Error::arg("range", format!("empty interval [{lo}, {hi}]")));
    }
    let lo = lo.min(0.0);
    let hi = hi.max(0.0);
    let mut back = if lo < 0.0 { integrate_towards(&sigma, c, lo, opts)? } else { vec![(0.0, c, sigma(c))] };
    let fwd = if hi > 0.0 { integrate_towards(&sigma, c, hi, opts)? } else { vec![(0.0, c, sigma(c))] };
    back.reverse();
    back.extend_from_slice(&fwd[1..]);
    Ok(OdeSolution { nodes: back })
}

/// `X(t) = K(b_H(t))` for `μ ≡ 0`.
pub fn solve_general_mu_zero(sigma: ScalarFn, c: f64, b: &Process, opts: OdeOptions) -> Result<Process> {
    let zero = b.zero_index()?;
    let live = &b.values[zero..];
    let lo = live.iter().copied().fold(0.0, f64::min);
    let hi = live.iter().copied().fold(0.0, f64::max);
    let k = solve_ode_k(|x| sigma.eval(x), c, lo, hi, opts)?;
    let values = b
        .values
        .iter()
        .enumerate()
        .map(|(i, &bv)| if i < zero { Ok(c) } else { k.eval(bv) })
        .collect::<Result<Vec<_>>>()?;
    Ok(Process { t0: b.t0, dt: b.dt, values })
}

/// Closed form of `dX = (aX + b) db_H + μ(X) dt`.
pub fn solve_affine(a: f64, bcoef: f64, mu_mode: MuMode, mu: f64, c: f64, b: &Process) -> Result<Process> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::arg("a", "must be finite and non-zero"));
    }
    let zero = b.zero_index()?;
    let t = |i: usize| b.time(i);
    // (b/a)(e^{a b_H} - 1), stable for small a
    let shift = |bv: f64| bcoef * bv * expm1_over_x(a * bv);
    let values: Vec<f64> = match mu_mode {
        MuMode::Constant => {
            let integrand: Vec<f64> = b.values.iter().map(|bv| (-a * bv).exp()).collect();
            let cum = cumulative_trapezoid(&integrand, zero, b.dt);
            b.values.iter().zip(&cum).map(|(&bv, ci)| shift(bv) + (a * bv).exp() * (mu * ci + c)).collect()
        }
        MuMode::Linear => {
            // (bμ/a) e^{-μs}(1 - e^{-a b_H(s)}) = bμ b_H(s) e^{-μs} · (1 - e^{-a b_H})/(a b_H)
            let integrand: Vec<f64> = b
                .values
                .iter()
                .enumerate()
                .map(|(i, &bv)| bcoef * mu * bv * (-mu * t(i)).exp() * expm1_over_x(-a * bv))
                .collect();
            let cum = cumulative_trapezoid(&integrand, zero, b.dt);
            b.values
                .iter()
                .enumerate()
                .map(|(i, &bv)| shift(bv) + (mu * t(i) + a * bv).exp() * (cum[i] + c))
                .collect()
        }
    };
    Ok(extend_path(&Process { t0: b.t0, dt: b.dt, values }, c))
}

/// `(e^x - 1)/x`, equal to 1 at 0.
fn expm1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-300 { 1.0 } else { libm::expm1(x) / x }
}

/// Explicit Euler: `X_{j+1} = X_j + σ(X_j) Δb_j + μ(X_j) dt`. First order
/// pathwise for Young SDEs; for qualitative experiments only.
pub fn solve_general_euler(sigma: ScalarFn, mu: ScalarFn, c: f64, b: &Process) -> Result<Process> {
    let zero = b.zero_index()?;
    let mut values = vec![c; b.values.len()];
    for j in zero..b.values.len() - 1 {
        let x = values[j];
        let next = x + sigma.eval(x) * (b.values[j + 1] - b.values[j]) + mu.eval(x) * b.dt;
        if !next.is_finite() {
            return Err(Error::Numerical(format!("Euler state became non-finite at t = {}", b.time(j + 1))));
        }
        values[j + 1] = next;
    }
    Ok(Process { t0: b.t0, dt: b.dt, values })
}

/// One heuristic clause of [`validate_h1_h2`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
}

/// Sampled checks of the regularity assumptions on `σ` and `μ`. Sampling a
/// finite grid cannot prove global properties; the report is heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub clauses: Vec<Clause>,
    pub heuristic: bool,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

fn lipschitz_estimate(f: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| ((f(w[1]) - f(w[0])) / (w[1] - w[0])).abs()).fold(0.0, f64::max)
}

/// Probes `σ`, `μ` on `n ≥ 1000` points of `[lo, hi]`.
pub fn validate_h1_h2(sigma: ScalarFn, mu: ScalarFn, h: HurstParam, lo: f64, hi: f64, n: usize) -> RegularityReport {
    let n = n.max(1000);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let fine: Vec<f64> = (0..2 * n - 1).map(|i| lo + (hi - lo) * i as f64 / (2 * n - 2) as f64).collect();
    let s = |x: f64| sigma.eval(x);
    let m = |x: f64| mu.eval(x);
    let min_abs_sigma = xs.iter().map(|&x| s(x).abs()).fold(f64::INFINITY, f64::min);
    // a sign change means a zero between probes
    let one_sign = xs.iter().all(|&x| s(x) > 0.0) || xs.iter().all(|&x| s(x) < 0.0);
    let lip = |f: &dyn Fn(f64) -> f64| {
        let (coarse, finer) = (lipschitz_estimate(f, &xs), lipschitz_estimate(f, &fine));
        (finer, finer.is_finite() && finer <= 1.1 * coarse + 1e-12)
    };
    let (sigma_lip, sigma_lip_ok) = lip(&s);
    let (mu_lip, mu_lip_ok) = lip(&m);
    // Hölder exponent of σ̇ from its oscillation at two spacings
    let step = (hi - lo) / (n - 1) as f64;
    let dsigma = |x: f64| (s(x + 0.5 * step) - s(x - 0.5 * step)) / step;
    let osc = |d: f64| xs.iter().map(|&x| (dsigma(x + d) - dsigma(x)).abs()).fold(0.0, f64::max);
    let (d1, d2) = ((hi - lo) / 50.0, (hi - lo) / 500.0);
    let (o1, o2) = (osc(d1), osc(d2));
    let eta = if o2 <= 1e-14 * (1.0 + o1) { 1.0 } else { ((o1 / o2).ln() / (d1 / d2).ln()).min(1.0) };
    let eta_needed = 1.0 / h.value() - 1.0;
    let mu_max = xs.iter().map(|&x| m(x).abs()).fold(0.0, f64::max);
    let (qlo, qhi) = (lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
    let mu_inner = xs.iter().filter(|&&x| x >= qlo && x <= qhi).map(|&x| m(x).abs()).fold(0.0, f64::max);
    RegularityReport {
        clauses: vec![
            Clause { name: "sigma_bounded_away_from_zero", passed: one_sign && min_abs_sigma > 1e-8, measured: min_abs_sigma },
            Clause { name: "sigma_lipschitz", passed: sigma_lip_ok, measured: sigma_lip },
            Clause { name: "sigma_dot_holder", passed: eta > eta_needed, measured: eta },
            Clause { name: "mu_bounded", passed: mu_max.is_finite() && mu_max <= 1.5 * mu_inner + 1e-12, measured: mu_max },
            Clause { name: "mu_lipschitz", passed: mu_lip_ok, measured: mu_lip },
        ],
        heuristic: true,
    }
}
