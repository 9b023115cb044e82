//! Tests of `H_0: σ = σ_0` against contiguous alternatives
//! `σ_ε = σ_0 + √ε (d + F(√ε))`.
//!
//! `F` statistics compare the first absolute moment of `ε^{2-H}Ÿ_ε/σ_{2H}`
//! with `σ_0`, `G` statistics the second moment with `σ_0²`. The decision is
//! one-sided (`d > 0`) against the Gaussian limit of the statistic under `H_0`.

use crate::estimators::Family;
use crate::fbm::{HurstParam, Process};
use crate::kernel::{smooth, Kernel, Orders, SmoothedProcess};
use crate::models::{solve_affine, solve_closed_form, ModelSpec, MuMode};
use crate::special::{normal_quantile, normal_sf};
use crate::stats::trapezoid;
use crate::{Error, Result};
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Note attached to every `G` report.
pub const G_PROVENANCE: &str = "G integrates the squared second derivative of Y_eps; a first-derivative \
     reading of this statistic does not match its eps^(2(2-H))/sigma_2H^2 normalization or its g_2 limit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `σ_ε(x) = σ_ε`, statistic `F_ε`.
    FConst,
    /// `σ_ε(x) = σ_ε x`, statistic `F_ε` centred by `σ∫|Y_ε|`.
    FMult,
    /// `σ_ε(x) = σ + a x`, `a = √ε(d + F(√ε))`, statistic `G_ε`.
    GConstToAffine,
    /// `σ_ε(x) = σ x + b`, `b = √ε(d + F(√ε))`, statistic `G_ε` centred by `σ²∫Y_ε²`.
    GMultToAffine,
}

impl Variant {
    pub fn parse(name: &str) -> Result<Variant> {
        match name {
            "f_const" => Ok(Variant::FConst),
            "f_mult" => Ok(Variant::FMult),
            "g_const_to_affine" => Ok(Variant::GConstToAffine),
            "g_mult_to_affine" => Ok(Variant::GMultToAffine),
            other => Err(Error::Unknown { kind: "test variant", name: other.to_string() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::FConst => "f_const",
            Variant::FMult => "f_mult",
            Variant::GConstToAffine => "g_const_to_affine",
            Variant::GMultToAffine => "g_mult_to_affine",
        }
    }

    /// Power `k` of the Hermite functional behind the statistic.
    pub fn k(self) -> u32 {
        match self {
            Variant::FConst | Variant::FMult => 1,
            Variant::GConstToAffine | Variant::GMultToAffine => 2,
        }
    }

    pub fn family(self) -> Family {
        match self {
            Variant::FConst | Variant::GConstToAffine => Family::Additive,
            Variant::FMult | Variant::GMultToAffine => Family::Multiplicative,
        }
    }
}

/// The vanishing perturbation `F(s)`, `s = √ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftFn {
    Zero,
    /// `a s`
    Linear(f64),
    /// `s²`
    Square,
}

impl ShiftFn {
    pub fn parse(text: &str) -> Result<ShiftFn> {
        match text.split_once(':') {
            None if text == "zero" => Ok(ShiftFn::Zero),
            None if text == "identity" => Ok(ShiftFn::Linear(1.0)),
            None if text == "square" => Ok(ShiftFn::Square),
            Some(("linear", a)) => a
                .parse()
                .map(ShiftFn::Linear)
                .map_err(|_| Error::arg("f_shift", format!("bad parameter in `{text}`"))),
            _ => Err(Error::Unknown { kind: "shift function", name: text.to_string() }),
        }
    }

    pub fn eval(self, s: f64) -> f64 {
        match self {
            ShiftFn::Zero => 0.0,
            ShiftFn::Linear(a) => a * s,
            ShiftFn::Square => s * s,
        }
    }
}

impl Default for ShiftFn {
    fn default() -> Self {
        ShiftFn::Linear(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub variant: Variant,
    pub sigma0: f64,
    pub d: f64,
    pub f_shift: ShiftFn,
    pub mu_mode: MuMode,
    pub mu: f64,
    pub c: f64,
    pub h: HurstParam,
    pub alpha: f64,
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::arg("sigma0", format!("must be positive, got {}", self.sigma0)));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::arg("d", format!("must be non-negative, got {}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::arg("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        self.h.require_estimable()
    }

    /// `√ε (d + F(√ε))`.
    pub fn perturbation(&self, eps: f64) -> f64 {
        let s = eps.sqrt();
        s * (self.d + self.f_shift.eval(s))
    }

    /// `σ_ε = σ_0 + √ε (d + F(√ε))`.
    pub fn sigma_eps(&self, eps: f64) -> f64 {
        self.sigma0 + self.perturbation(eps)
    }

    /// The model followed under `H_0`.
    pub fn null_model(&self) -> ModelSpec {
        self.model_with_sigma(self.sigma0)
    }

    fn model_with_sigma(&self, sigma: f64) -> ModelSpec {
        let (mu, c) = (self.mu, self.c);
        match (self.variant.family(), self.mu_mode) {
            (Family::Additive, MuMode::Constant) => ModelSpec::Additive { sigma, mu, c },
            (Family::Additive, MuMode::Linear) => ModelSpec::OrnsteinUhlenbeck { sigma, mu, c },
            (Family::Multiplicative, MuMode::Linear) => ModelSpec::Geometric { sigma, mu, c },
            (Family::Multiplicative, MuMode::Constant) => ModelSpec::Mixed { sigma, mu, c },
        }
    }
}

/// Trajectory under the alternative at bandwidth `eps`; equal to the null
/// model's trajectory whenever the perturbation vanishes.
pub fn simulate_alternative(spec: &TestSpec, b: &Process, eps: f64) -> Result<Process> {
    spec.validate()?;
    let p = spec.perturbation(eps);
    match spec.variant {
        Variant::FConst | Variant::FMult => {
            let sigma = spec.sigma_eps(eps);
            if !(sigma > 0.0) {
                return Err(Error::Domain(format!("σ_ε = {sigma} is not positive")));
            }
            solve_closed_form(&spec.model_with_sigma(sigma), b)
        }
        _ if p == 0.0 => solve_closed_form(&spec.null_model(), b),
        Variant::GConstToAffine => solve_affine(p, spec.sigma0, spec.mu_mode, spec.mu, spec.c, b),
        Variant::GMultToAffine => solve_affine(spec.sigma0, p, spec.mu_mode, spec.mu, spec.c, b),
    }
}

/// Smooths an observed trajectory with what the statistics need.
pub fn observe(y: &Process, kernel: Kernel, eps: f64) -> Result<SmoothedProcess> {
    smooth(y, kernel, eps, Orders::VALUE_AND_SECOND)
}

fn integral_of(values: &[f64], f: impl Fn(f64) -> f64, dt: f64) -> f64 {
    let v: Vec<f64> = values.iter().map(|x| f(*x)).collect();
    trapezoid(&v, dt)
}

/// `F_ε = ε^{-1/2} [√(π/2) (ε^{2-H}/σ_{2H}) ∫|Ÿ_ε| - σ_0]`, the centring being
/// `σ_0 ∫|Y_ε|` in the multiplicative variant.
pub fn f_statistic(y: &SmoothedProcess, sigma0: f64, h: HurstParam, sigma2h_sq: f64, variant: Variant) -> Result<f64> {
    let eps = y.eps;
    let scale = (core::f64::consts::PI / 2.0).sqrt() * eps.powf(2.0 - h.value()) / sigma2h_sq.sqrt();
    let main = scale * integral_of(y.second()?, f64::abs, y.dt);
    let center = match variant.family() {
        Family::Additive => sigma0,
        Family::Multiplicative => sigma0 * integral_of(y.value()?, f64::abs, y.dt),
    };
    Ok((main - center) / eps.sqrt())
}

/// `G_ε = ε^{-1/2} [(ε^{2(2-H)}/σ²_{2H}) ∫Ÿ_ε² - σ_0²]`, the centring being
/// `σ_0² ∫Y_ε²` in the multiplicative variant.
pub fn g_statistic(y: &SmoothedProcess, sigma0: f64, h: HurstParam, sigma2h_sq: f64, variant: Variant) -> Result<f64> {
    let eps = y.eps;
    let scale = eps.powf(2.0 * (2.0 - h.value())) / sigma2h_sq;
    let main = scale * integral_of(y.second()?, |v| v * v, y.dt);
    let s2 = sigma0 * sigma0;
    let center = match variant.family() {
        Family::Additive => s2,
        Family::Multiplicative => s2 * integral_of(y.value()?, |v| v * v, y.dt),
    };
    Ok((main - center) / eps.sqrt())
}

/// The variant's statistic (`F` or `G`).
pub fn statistic(y: &SmoothedProcess, spec: &TestSpec, sigma2h_sq: f64) -> Result<f64> {
    match spec.variant.k() {
        1 => f_statistic(y, spec.sigma0, spec.h, sigma2h_sq, spec.variant),
        _ => g_statistic(y, spec.sigma0, spec.h, sigma2h_sq, spec.variant),
    }
}

/// Null standard deviation of the statistic. `sigma_g_sq` is `σ²_{g_1}` for
/// `F` and `σ²_{g_2}` for `G`. Multiplicative variants have mixed-Gaussian
/// nulls and are studentized by the plug-ins `σ²_{g_1}σ²∫Y²`, `σ²_{g_2}σ⁴∫Y⁴`.
pub fn null_scale(spec: &TestSpec, sigma_g_sq: f64, y: &SmoothedProcess) -> Result<f64> {
    let s = spec.sigma0;
    let var = match spec.variant {
        Variant::FConst => sigma_g_sq * s * s,
        Variant::GConstToAffine => sigma_g_sq * s.powi(4),
        Variant::FMult => sigma_g_sq * s * s * integral_of(y.value()?, |v| v * v, y.dt),
        Variant::GMultToAffine => sigma_g_sq * s.powi(4) * integral_of(y.value()?, |v| v.powi(4), y.dt),
    };
    Ok(var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: f64,
    pub center: f64,
    pub scale: f64,
    pub p_value: f64,
    pub reject: bool,
    pub replicate: Option<usize>,
    pub seed: Option<u64>,
    pub note: Option<&'static str>,
}

/// One-sided decision: `p = 1 - Φ((stat - center)/scale)`, reject when `p < α`.
pub fn test_decision(stat: f64, spec: &TestSpec, scale: f64) -> TestReport {
    let p_value = if scale > 0.0 { normal_sf(stat / scale).clamp(0.0, 1.0) } else { f64::NAN };
    TestReport {
        statistic: stat,
        center: 0.0,
        scale,
        p_value,
        reject: p_value < spec.alpha,
        replicate: None,
        seed: None,
        note: (spec.variant.k() == 2).then_some(G_PROVENANCE),
    }
}

/// Critical value `z_{1-α}` of the standardized statistic.
pub fn critical_value(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha)
}

/// Simulates, smooths, computes and decides on one driving path.
pub fn run_on_path(
    spec: &TestSpec,
    b: &Process,
    kernel: Kernel,
    eps: f64,
    sigma2h_sq: f64,
    sigma_g_sq: f64,
) -> Result<TestReport> {
    let y = simulate_alternative(spec, b, eps)?;
    let sy = observe(&y, kernel, eps)?;
    let stat = statistic(&sy, spec, sigma2h_sq)?;
    let scale = null_scale(spec, sigma_g_sq, &sy)?;
    Ok(test_decision(stat, spec, scale))
}
