//! Monte Carlo experiments: replicate paths, per-replicate statistics,
//! aggregation and checks against the theoretical constants.
//!
//! Replicate `i` uses seed `base_seed + i`. Replicates run on the rayon pool;
//! results are collected in replicate order, so a summary depends only on the
//! seed set. A replicate that errors is excluded and counted; more than 5%
//! failures fails the experiment.

use crate::cache::{CellConstants, ConstantsCache};
use crate::config::{parse_mu_mode, ModelConfig};
use anyhow::{bail, ensure, Context, Result};
use fbmest_core::constants::{gaussian_abs_moment, SpectralGrid};
use fbmest_core::estimators::{m_k, regression_from_log_m, sigma_known_h_from, z_x_process, Family, ScaleSet};
use fbmest_core::fbm::{steps_exact, FbmSynthesizer, Grid};
use fbmest_core::hypothesis::{self, ShiftFn, TestSpec, Variant};
use fbmest_core::kernel::{smooth, Orders};
use fbmest_core::models::{simulate, ModelSpec};
use fbmest_core::stats::{isotonic_increasing, ks_distance_normal, trapezoid};
use fbmest_core::{HurstParam, Kernel, Process};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const MIN_REPLICATES: usize = 50;
pub const MAX_FAILURE_RATE: f64 = 0.05;

fn default_kernel() -> String {
    Kernel::SecondDifference.name().into()
}
fn default_k() -> Vec<u32> {
    vec![2]
}
fn default_scales() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_steps() -> usize {
    16
}
fn default_alpha() -> f64 {
    0.05
}
fn default_shift() -> String {
    "identity".into()
}
fn default_mu_mode() -> String {
    "constant".into()
}

/// Settings of a test experiment; `h` and `kernel` come from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub variant: String,
    pub sigma0: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_shift")]
    pub f_shift: String,
    #[serde(default = "default_mu_mode")]
    pub mu_mode: String,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl TestConfig {
    pub fn to_spec(&self, h: f64) -> Result<TestSpec> {
        let spec = TestSpec {
            variant: Variant::parse(&self.variant)?,
            sigma0: self.sigma0,
            d: self.d,
            f_shift: ShiftFn::parse(&self.f_shift)?,
            mu_mode: parse_mu_mode(&self.mu_mode)?,
            mu: self.mu,
            c: self.c,
            h: HurstParam::new(h)?,
            alpha: self.alpha,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// What each replicate computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// `S_{g_k}(ε) = ε^{-1/2} ∫_0^1 g_k(Z^X_ε / σ)`.
    Clt,
    /// Regression estimator `(Ĥ_k, σ̂_k)` over `scales`.
    Regression,
    /// `σ̃_k` with `H` known.
    KnownH,
    /// Test statistic under the configured alternative.
    Test(TestConfig),
}

impl Target {
    pub fn quantities(&self) -> &'static [&'static str] {
        match self {
            Target::Clt => &["s_g"],
            Target::Regression => &["h_hat", "sigma_hat", "h_err", "sigma_err"],
            Target::KnownH => &["sigma_tilde", "sigma_tilde_err"],
            Target::Test(_) => &["statistic", "p_value", "reject", "int_x"],
        }
    }
}

/// A bound on one summary value of every matching cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub quantity: String,
    /// `mean`, `variance_ratio` or `ks`.
    pub measure: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub model: ModelConfig,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub h: f64,
    pub eps: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: Vec<u32>,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub target: Target,
    /// Grid steps per smallest bandwidth.
    #[serde(default = "default_steps")]
    pub steps_per_eps: usize,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl Experiment {
    fn ks(&self) -> Result<Vec<u32>> {
        match &self.target {
            Target::Test(t) => Ok(vec![Variant::parse(&t.variant)?.k()]),
            _ => Ok(self.k.clone()),
        }
    }

    fn window_scales(&self) -> Vec<f64> {
        match self.target {
            Target::Regression => self.scales.clone(),
            _ => vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.replicates >= MIN_REPLICATES, "replicates must be >= {MIN_REPLICATES}, got {}", self.replicates);
        ensure!(!self.eps.is_empty(), "eps list is empty");
        ensure!(self.eps.iter().all(|e| *e > 0.0 && *e < 0.25), "eps values must lie in (0, 1/4)");
        ensure!(self.ks()?.iter().all(|k| *k >= 1), "k must be >= 1");
        ensure!(self.steps_per_eps >= 1, "steps_per_eps must be >= 1");
        let hp = HurstParam::new(self.h)?;
        if !matches!(self.target, Target::Clt) {
            hp.require_estimable()?;
        }
        if matches!(self.target, Target::Regression) {
            ScaleSet::new(self.eps[0], &self.scales)?;
        }
        Kernel::builtin(&self.kernel)?;
        self.model.to_spec()?;
        if let Target::Test(t) = &self.target {
            t.to_spec(self.h)?;
        }
        for c in &self.checks {
            ensure!(self.target.quantities().contains(&c.quantity.as_str()), "check on unknown quantity `{}`", c.quantity);
            ensure!(["mean", "variance_ratio", "ks"].contains(&c.measure.as_str()), "unknown check `{}`", c.measure);
        }
        let dt = self.dt();
        for w in self.windows() {
            ensure!(steps_exact(w, dt).is_some(), "window {w} is not a multiple of the grid step {dt}");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min) / self.steps_per_eps as f64
    }

    fn windows(&self) -> Vec<f64> {
        let scales = self.window_scales();
        self.eps.iter().flat_map(|e| scales.iter().map(move |c| e * c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub eps: f64,
    pub k: u32,
    pub quantity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub eps: f64,
    pub k: u32,
    pub quantity: String,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub theoretical_variance: Option<f64>,
    pub variance_ratio: Option<f64>,
    /// KS distance to `N(0, theoretical_variance)`.
    pub ks_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub quantity: String,
    pub measure: String,
    pub eps: f64,
    pub k: u32,
    pub measured: f64,
    pub lo: f64,
    pub hi: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub experiment: String,
    pub replicates: usize,
    pub failures: usize,
    pub failure_examples: Vec<String>,
    pub cells: Vec<CellSummary>,
    pub checks: Vec<CheckResult>,
    /// Seeds of the replicates that succeeded, in replicate order.
    #[serde(skip)]
    pub seeds: Vec<(usize, u64)>,
    /// `samples[cell][j]` belongs to `seeds[j]`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl McSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn index(&self, eps: f64, k: u32, quantity: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.eps == eps && c.k == k && c.quantity == quantity)
    }

    pub fn cell(&self, eps: f64, k: u32, quantity: &str) -> Option<&CellSummary> {
        self.index(eps, k, quantity).map(|i| &self.cells[i])
    }

    pub fn sample(&self, eps: f64, k: u32, quantity: &str) -> Option<&[f64]> {
        self.index(eps, k, quantity).map(|i| self.samples[i].as_slice())
    }

    /// Long format: `replicate,seed,eps,k,quantity,value`.
    pub fn write_long_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replicate", "seed", "eps", "k", "quantity", "value"])?;
        for (j, (rep, seed)) in self.seeds.iter().enumerate() {
            for (cell, values) in self.cells.iter().zip(&self.samples) {
                out.write_record([
                    rep.to_string(),
                    seed.to_string(),
                    cell.eps.to_string(),
                    cell.k.to_string(),
                    cell.quantity.clone(),
                    values[j].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Mean, unbiased variance and standard error, summed in sorted order so the
/// result does not depend on the order of `values`.
pub fn moments(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = if v.len() > 1 { dev.iter().sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var, (var / n).sqrt())
}

struct ReplicateContext {
    kernel: Kernel,
    hp: HurstParam,
    family: Family,
    sigma: f64,
    model: Option<ModelSpec>,
    synth: FbmSynthesizer,
    constants: Vec<CellConstants>,
    spectrum: Option<SpectralGrid>,
    scale_set: Option<ScaleSet>,
    test: Option<TestSpec>,
}

fn g_integral(z: &[f64], k: u32, dt: f64) -> Result<f64> {
    let m = gaussian_abs_moment(k as f64)?;
    let v: Vec<f64> = z.iter().map(|x| x.abs().powi(k as i32) / m - 1.0).collect();
    Ok(trapezoid(&v, dt))
}

/// `∫_0^1 X` by the trapezoid rule on the grid of `x`.
pub fn unit_integral(x: &Process) -> Result<f64> {
    let i0 = x.zero_index()?;
    let n = steps_exact(1.0, x.dt).context("grid step does not divide 1")?;
    ensure!(i0 + n < x.values.len(), "grid does not reach t = 1");
    Ok(trapezoid(&x.values[i0..=i0 + n], x.dt))
}

fn replicate(exp: &Experiment, ctx: &ReplicateContext, seed: u64) -> Result<Vec<f64>> {
    let b = ctx.synth.sample(seed).to_process();
    let x = match &ctx.model {
        None => b.clone(),
        Some(spec) => simulate(spec, &b)?.process,
    };
    let ks = exp.ks()?;
    let mut out = Vec::new();
    for &eps in &exp.eps {
        match &exp.target {
            Target::Clt => {
                let sm = smooth(&x, ctx.kernel, eps, Orders::VALUE_AND_SECOND)?;
                for (ki, &k) in ks.iter().enumerate() {
                    let z: Vec<f64> = z_x_process(&sm, ctx.hp, ctx.constants[ki].sigma2h_sq, ctx.family)?
                        .iter()
                        .map(|v| v / ctx.sigma)
                        .collect();
                    out.push(g_integral(&z, k, sm.dt)? / eps.sqrt());
                }
            }
            Target::Regression => {
                let scales = ctx.scale_set.as_ref().unwrap();
                let smoothed = scales
                    .c
                    .iter()
                    .map(|c| smooth(&x, ctx.kernel, eps * c, Orders::VALUE_AND_SECOND))
                    .collect::<fbmest_core::Result<Vec<_>>>()?;
                let scales = ScaleSet::new(eps, &scales.c)?;
                for &k in &ks {
                    let log_m = smoothed
                        .iter()
                        .map(|s| m_k(s, k as f64, ctx.family).map(f64::ln))
                        .collect::<fbmest_core::Result<Vec<_>>>()?;
                    let est = regression_from_log_m(&scales, k as f64, &log_m, ctx.spectrum.as_ref().unwrap())?;
                    let h = ctx.hp.value();
                    out.extend([
                        est.h_hat,
                        est.sigma_hat,
                        (est.h_hat - h) / eps.sqrt(),
                        (est.sigma_hat - ctx.sigma) / (eps.sqrt() * eps.ln()),
                    ]);
                }
            }
            Target::KnownH => {
                let sm = smooth(&x, ctx.kernel, eps, Orders::VALUE_AND_SECOND)?;
                for (ki, &k) in ks.iter().enumerate() {
                    let s = sigma_known_h_from(&sm, k as f64, ctx.hp, ctx.constants[ki].sigma2h_sq, ctx.family)?;
                    out.extend([s, (s - ctx.sigma) / eps.sqrt()]);
                }
            }
            Target::Test(_) => {
                let spec = ctx.test.as_ref().unwrap();
                let c = &ctx.constants[0];
                let y = hypothesis::simulate_alternative(spec, &b, eps)?;
                let sy = hypothesis::observe(&y, ctx.kernel, eps)?;
                let stat = hypothesis::statistic(&sy, spec, c.sigma2h_sq)?;
                let scale = hypothesis::null_scale(spec, c.sigma_gk_sq, &sy)?;
                let report = hypothesis::test_decision(stat, spec, scale);
                out.extend([stat, report.p_value, report.reject as u8 as f64, unit_integral(&y)?]);
            }
        }
    }
    Ok(out)
}

fn theoretical_variance(exp: &Experiment, ctx: &ReplicateContext, ki: usize, quantity: &str) -> Result<Option<f64>> {
    let c = &ctx.constants[ki];
    let k = c.k as f64;
    let s = ctx.sigma;
    Ok(match quantity {
        "s_g" => Some(c.sigma_gk_sq),
        "h_err" => Some(c.regression_variance()?),
        "sigma_err" => Some(s * s * c.regression_variance()?),
        "sigma_tilde_err" => Some(s * s * c.sigma_gk_sq / (k * k)),
        "statistic" => match &exp.target {
            Target::Test(_) => {
                let spec = ctx.test.as_ref().unwrap();
                let s0 = spec.sigma0;
                match spec.variant {
                    Variant::FConst => Some(c.sigma_gk_sq * s0 * s0),
                    Variant::GConstToAffine => Some(c.sigma_gk_sq * s0.powi(4)),
                    _ => None,
                }
            }
            _ => None,
        },
        _ => None,
    })
}

fn build_context(exp: &Experiment, cache: &ConstantsCache) -> Result<ReplicateContext> {
    exp.validate()?;
    let kernel = Kernel::builtin(&exp.kernel)?;
    let hp = HurstParam::new(exp.h)?;
    let model = exp.model.to_spec()?;
    let family = match &model {
        Some(m) if m.is_multiplicative() => Family::Multiplicative,
        _ => Family::Additive,
    };
    let dt = exp.dt();
    let eps_max = exp.windows().into_iter().fold(0.0, f64::max);
    let grid = Grid::covering_unit_interval(eps_max, dt)?;
    let synth = FbmSynthesizer::new(hp, grid.n, grid.t0, dt)?;
    let cov_scales = match exp.target {
        Target::Regression => exp.scales.clone(),
        _ => Vec::new(),
    };
    let constants =
        exp.ks()?.iter().map(|&k| cache.get(exp.h, kernel, k, &cov_scales)).collect::<Result<Vec<_>>>()?;
    let test = match &exp.target {
        Target::Test(t) => Some(t.to_spec(exp.h)?),
        _ => None,
    };
    let (spectrum, scale_set) = match exp.target {
        Target::Regression => (Some(SpectralGrid::new(kernel)), Some(ScaleSet::new(exp.eps[0], &exp.scales)?)),
        _ => (None, None),
    };
    Ok(ReplicateContext {
        kernel,
        hp,
        family,
        sigma: exp.model.sigma_scale(),
        model,
        synth,
        constants,
        spectrum,
        scale_set,
        test,
    })
}

pub fn run_experiment(exp: &Experiment, cache: &ConstantsCache) -> Result<McSummary> {
    let ctx = build_context(exp, cache).with_context(|| format!("experiment `{}`", exp.name))?;
    let results: Vec<Result<Vec<f64>>> = (0..exp.replicates)
        .into_par_iter()
        .map(|i| replicate(exp, &ctx, exp.base_seed.wrapping_add(i as u64)))
        .collect();

    let ks = exp.ks()?;
    let mut cells = Vec::new();
    for &eps in &exp.eps {
        for &k in &ks {
            for q in exp.target.quantities() {
                cells.push(Cell { eps, k, quantity: (*q).to_string() });
            }
        }
    }
    let mut samples = vec![Vec::with_capacity(exp.replicates); cells.len()];
    let mut seeds = Vec::new();
    let mut failure_examples = Vec::new();
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(values) if values.len() == cells.len() && values.iter().all(|v| !v.is_nan()) => {
                seeds.push((i, exp.base_seed.wrapping_add(i as u64)));
                for (s, v) in samples.iter_mut().zip(values) {
                    s.push(v);
                }
            }
            Ok(_) => {
                failures += 1;
                if failure_examples.len() < 5 {
                    failure_examples.push(format!("replicate {i}: NaN in output"));
                }
            }
            Err(e) => {
                failures += 1;
                if failure_examples.len() < 5 {
                    failure_examples.push(format!("replicate {i}: {e:#}"));
                }
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * exp.replicates as f64 {
        bail!(
            "experiment `{}`: {failures} of {} replicates failed (first: {})",
            exp.name,
            exp.replicates,
            failure_examples.first().map(String::as_str).unwrap_or("")
        );
    }

    let mut summaries = Vec::with_capacity(cells.len());
    for (cell, values) in cells.iter().zip(&samples) {
        let ki = ks.iter().position(|k| *k == cell.k).unwrap();
        let (mean, variance, std_error) = moments(values);
        let theory = theoretical_variance(exp, &ctx, ki, &cell.quantity)?;
        summaries.push(CellSummary {
            eps: cell.eps,
            k: cell.k,
            quantity: cell.quantity.clone(),
            n: values.len(),
            mean,
            variance,
            std_error,
            theoretical_variance: theory,
            variance_ratio: theory.map(|t| variance / t),
            ks_distance: theory.map(|t| ks_distance_normal(values, 0.0, t.sqrt())),
        });
    }

    let mut checks = Vec::new();
    for check in &exp.checks {
        for s in &summaries {
            if s.quantity != check.quantity
                || check.k.is_some_and(|k| k != s.k)
                || check.eps.is_some_and(|e| e != s.eps)
            {
                continue;
            }
            let measured = match check.measure.as_str() {
                "mean" => s.mean,
                "variance_ratio" => s.variance_ratio.unwrap_or(f64::NAN),
                _ => s.ks_distance.unwrap_or(f64::NAN),
            };
            checks.push(CheckResult {
                quantity: s.quantity.clone(),
                measure: check.measure.clone(),
                eps: s.eps,
                k: s.k,
                measured,
                lo: check.lo,
                hi: check.hi,
                passed: measured >= check.lo && measured <= check.hi,
            });
        }
    }

    Ok(McSummary {
        experiment: exp.name.clone(),
        replicates: exp.replicates,
        failures,
        failure_examples,
        cells: summaries,
        checks,
        seeds,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatio {
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `sample variance / theoretical` with a percentile bootstrap 95% interval.
pub fn variance_ratio(values: &[f64], theoretical: f64, n_boot: usize, seed: u64) -> Result<VarianceRatio> {
    ensure!(theoretical > 0.0, "theoretical variance must be positive, got {theoretical}");
    ensure!(values.len() >= 2, "need at least two values");
    let ratio = moments(values).1 / theoretical;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut boots: Vec<f64> = (0..n_boot.max(1))
        .map(|_| {
            let re: Vec<f64> = (0..n).map(|_| values[rng.random_range(0..n)]).collect();
            moments(&re).1 / theoretical
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let q = |p: f64| boots[((p * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
    Ok(VarianceRatio { ratio, lo: q(0.025), hi: q(0.975) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityRow {
    pub k: u32,
    /// `σ²_{g_k} / k²`
    pub theoretical: f64,
    /// Variance of `(σ̃_k - σ)/√ε`, divided by `σ²`.
    pub monte_carlo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityTable {
    pub rows: Vec<MinimalityRow>,
    pub theoretical_argmin: u32,
    pub monte_carlo_argmin: u32,
}

impl MinimalityTable {
    pub fn passed(&self) -> bool {
        self.theoretical_argmin == 2 && self.monte_carlo_argmin == 2
    }
}

/// Known-`H` estimators `σ̃_k` on the additive model for each `k`.
pub fn minimality_scan(
    k_list: &[u32],
    h: f64,
    kernel: Kernel,
    eps: f64,
    model: ModelConfig,
    replicates: usize,
    base_seed: u64,
    cache: &ConstantsCache,
) -> Result<MinimalityTable> {
    for k in 1..=4 {
        ensure!(k_list.contains(&k), "k list must contain 1, 2, 3 and 4");
    }
    let exp = Experiment {
        name: "minimality".into(),
        model,
        kernel: kernel.name().into(),
        h,
        eps: vec![eps],
        k: k_list.to_vec(),
        scales: vec![1.0],
        replicates,
        base_seed,
        target: Target::KnownH,
        steps_per_eps: default_steps().max(kernel.min_steps()),
        checks: Vec::new(),
    };
    let sigma = exp.model.sigma_scale();
    let summary = run_experiment(&exp, cache)?;
    let rows = k_list
        .iter()
        .map(|&k| {
            let cell = summary.cell(eps, k, "sigma_tilde_err").unwrap();
            MinimalityRow {
                k,
                theoretical: cell.theoretical_variance.unwrap() / (sigma * sigma),
                monte_carlo: cell.variance / (sigma * sigma),
            }
        })
        .collect::<Vec<_>>();
    let argmin = |f: fn(&MinimalityRow) -> f64| {
        rows.iter().min_by(|a, b| f(a).total_cmp(&f(b))).map(|r| r.k).unwrap()
    };
    Ok(MinimalityTable { theoretical_argmin: argmin(|r| r.theoretical), monte_carlo_argmin: argmin(|r| r.monte_carlo), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub d: f64,
    pub rejection_rate: f64,
    pub mean_statistic: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
    /// Largest gap between the rates and their isotonic fit.
    pub isotonic_deviation: f64,
    pub monotone: bool,
}

pub const MONOTONE_TOL: f64 = 0.05;

impl PowerCurve {
    /// `d,rejection_rate,mean_statistic,replicates,failures`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["d", "rejection_rate", "mean_statistic", "replicates", "failures"])?;
        for p in &self.points {
            out.write_record([
                p.d.to_string(),
                p.rejection_rate.to_string(),
                p.mean_statistic.to_string(),
                p.replicates.to_string(),
                p.failures.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Rejection rate per `d`; every `d` reuses the same seeds.
pub fn power_curve(
    template: &TestConfig,
    h: f64,
    kernel: Kernel,
    d_values: &[f64],
    replicates: usize,
    eps: f64,
    base_seed: u64,
    cache: &ConstantsCache,
) -> Result<PowerCurve> {
    ensure!(replicates >= 100, "power curves need at least 100 replicates, got {replicates}");
    let mut points = Vec::with_capacity(d_values.len());
    for &d in d_values {
        let exp = Experiment {
            name: format!("power d={d}"),
            model: ModelConfig::fbm(),
            kernel: kernel.name().into(),
            h,
            eps: vec![eps],
            k: default_k(),
            scales: vec![1.0],
            replicates,
            base_seed,
            target: Target::Test(TestConfig { d, ..template.clone() }),
            steps_per_eps: default_steps().max(kernel.min_steps()),
            checks: Vec::new(),
        };
        let k = Variant::parse(&template.variant)?.k();
        let s = run_experiment(&exp, cache)?;
        points.push(PowerPoint {
            d,
            rejection_rate: s.cell(eps, k, "reject").unwrap().mean,
            mean_statistic: s.cell(eps, k, "statistic").unwrap().mean,
            replicates: s.seeds.len(),
            failures: s.failures,
        });
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|a, b| points[*a].d.total_cmp(&points[*b].d));
    let rates: Vec<f64> = order.iter().map(|i| points[*i].rejection_rate).collect();
    let fit = isotonic_increasing(&rates);
    let isotonic_deviation = rates.iter().zip(&fit).map(|(r, f)| (r - f).abs()).fold(0.0, f64::max);
    Ok(PowerCurve { points, isotonic_deviation, monotone: isotonic_deviation <= MONOTONE_TOL })
}

fn check(quantity: &str, measure: &str, lo: f64, hi: f64) -> Check {
    Check { quantity: quantity.into(), measure: measure.into(), lo, hi, k: None, eps: None }
}

/// Built-in experiments, addressable by name from the CLI.
pub fn catalog() -> Vec<Experiment> {
    let eps = 2f64.powi(-9);
    let base = |name: &str, model: ModelConfig, target: Target, checks: Vec<Check>| Experiment {
        name: name.into(),
        model,
        kernel: default_kernel(),
        h: 0.7,
        eps: vec![eps],
        k: default_k(),
        scales: default_scales(),
        replicates: 500,
        base_seed: 1,
        target,
        steps_per_eps: default_steps(),
        checks,
    };
    let regression_checks = vec![
        check("h_hat", "mean", 0.68, 0.72),
        check("h_err", "variance_ratio", 0.8, 1.25),
        check("sigma_err", "variance_ratio", 0.7, 1.4),
    ];
    let f_null = TestConfig {
        variant: "f_const".into(),
        sigma0: 1.0,
        d: 0.0,
        alpha: 0.05,
        f_shift: default_shift(),
        mu_mode: default_mu_mode(),
        mu: 0.5,
        c: 1.0,
    };
    let mut known_h = base(
        "known_h_m4",
        ModelConfig::named("m4", 2.0, 0.5, 1.0),
        Target::KnownH,
        vec![Check { k: Some(2), ..check("sigma_tilde", "mean", 1.96, 2.04) }, check("sigma_tilde_err", "variance_ratio", 0.8, 1.25)],
    );
    known_h.k = vec![1, 2, 3, 4];
    let mut size = base("size_f_const", ModelConfig::fbm(), Target::Test(f_null.clone()), vec![check("reject", "mean", 0.03, 0.08)]);
    size.replicates = 1000;
    vec![
        base(
            "clt_sg2",
            ModelConfig::fbm(),
            Target::Clt,
            vec![check("s_g", "ks", 0.0, 0.08), check("s_g", "variance_ratio", 0.8, 1.25)],
        ),
        base("regression_m4", ModelConfig::named("m4", 2.0, 0.5, 1.0), Target::Regression, regression_checks.clone()),
        base("regression_m6", ModelConfig::named("m6", 2.0, 0.5, 1.0), Target::Regression, regression_checks),
        known_h,
        size,
        base(
            "null_g_const",
            ModelConfig::fbm(),
            Target::Test(TestConfig { variant: "g_const_to_affine".into(), ..f_null }),
            vec![check("statistic", "variance_ratio", 0.7, 1.4)],
        ),
    ]
}

pub fn builtin(name: &str) -> Result<Experiment> {
    let all = catalog();
    let names: Vec<String> = all.iter().map(|e| e.name.clone()).collect();
    all.into_iter()
        .find(|e| e.name == name)
        .with_context(|| format!("unknown experiment `{name}` (built-ins: {})", names.join(", ")))
}
