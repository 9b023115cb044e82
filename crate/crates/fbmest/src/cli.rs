//! The `fbmest` command line.
//!
//! Every option may also come from a flat TOML file given by `--config`;
//! flags win over the file. Each run writes `manifest.json` and `run.toml`
//! next to its outputs; `fbmest <command> --config run.toml` repeats it.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use crate::cache::ConstantsCache;
use crate::config::{parse_eps, parse_list, parse_mu_mode, ModelConfig};
use crate::io::{load_fbm1, save_fbm1, write_path_csv};
use crate::mc::{self, power_curve, run_experiment, Experiment, TestConfig};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fbmest_core::constants::{Order, SpectralGrid};
use fbmest_core::estimators::{
    estimate_h_sigma, estimate_sigma_known_h, functional_statistic, pointwise_sigma, Family, ScaleSet,
};
use fbmest_core::fbm::{sample_fbm, Grid};
use fbmest_core::hypothesis::{self, critical_value, TestReport};
use fbmest_core::kernel::{smooth, Orders};
use fbmest_core::models::{simulate, ScalarFn};
use fbmest_core::{HurstParam, Kernel, Process};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "fbmest", version, about = "Simulation, estimation and tests for fBm-driven pseudo-diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sample fBm or a model trajectory.
    Simulate,
    /// Estimate (H, σ) or volatility functionals.
    Estimate,
    /// Run the σ test over replicates and a power curve.
    Test,
    /// Run a Monte Carlo experiment.
    Mc,
    /// Print the asymptotic constants.
    Constants,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Test => "test",
            Command::Mc => "mc",
            Command::Constants => "constants",
        }
    }
}

/// All options. Every field is optional so that the config file and the
/// flags can be merged before defaults apply.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// TOML file with `key = value` options.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// second_difference or c2_bump.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Directory of the constants cache.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,

    /// Hurst parameter (constants, test, simulate).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Hurst parameter of the simulated trajectory in `estimate`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_true: Option<f64>,
    /// Bandwidth, decimal or `2^-9`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    /// Grid step, decimal or `2^-13` (default eps/16).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<String>,
    /// Hermite power k.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Comma-separated scale factors c_i.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<String>,

    /// fbm, m4, m5, m6, m7, general, affine, euler.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Initial value X(0).
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// constant or linear.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_mode: Option<String>,
    /// Catalog function, e.g. `sin_offset:2.0`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_fn: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_fn: Option<String>,
    /// fbm1, csv or both.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// Observed trajectory (FBM1) for `estimate`, instead of simulating one.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    /// regression, known-h, functional or pointwise.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    /// Known H for `known-h`, `functional` and `pointwise` (default h-true).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_known: Option<f64>,
    /// Weight function h(x) of the functional estimator (catalog name).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_fn: Option<String>,
    /// Bandwidth of the pointwise estimator.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,

    /// f_const, f_mult, g_const_to_affine, g_mult_to_affine.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    /// Alternative shift d.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Comma-separated d values of the power curve.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_values: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// zero, identity, square or linear:a.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_shift: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,

    /// Built-in experiment name, or a TOML file defining one.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<fbmest_core::Error> for CliError {
    fn from(e: fbmest_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {reason}"))
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> std::result::Result<T, CliError> {
    v.clone().ok_or_else(|| usage(flag, "is required"))
}

/// Flags over file: both are turned into JSON maps and overlaid.
pub fn merge(file: &RunConfig, flags: &RunConfig) -> Result<RunConfig> {
    let mut base = serde_json::to_value(file)?;
    if let (Value::Object(b), Value::Object(f)) = (&mut base, serde_json::to_value(flags)?) {
        for (k, v) in f {
            b.insert(k, v);
        }
    }
    Ok(serde_json::from_value(base)?)
}

pub fn load_config(path: &Path) -> std::result::Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage("config", format!("{}: {e}", path.display())))
}

struct Env {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    kernel: Kernel,
    cache: ConstantsCache,
    outputs: Vec<String>,
}

impl Env {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", p.display()))
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    fn eps(&self) -> std::result::Result<f64, CliError> {
        parse_eps(self.cfg.eps.as_deref().unwrap_or("2^-9")).map_err(|e| usage("eps", e))
    }

    fn scales(&self) -> std::result::Result<Vec<f64>, CliError> {
        parse_list(self.cfg.scales.as_deref().unwrap_or("1,2")).map_err(|e| usage("scales", e))
    }

    fn model(&self, default: &str) -> std::result::Result<ModelConfig, CliError> {
        let c = &self.cfg;
        let m = ModelConfig {
            model: c.model.clone().unwrap_or_else(|| default.into()),
            sigma: c.sigma.unwrap_or(1.0),
            mu: c.mu.unwrap_or(0.0),
            c: c.c.unwrap_or(1.0),
            a: c.a.unwrap_or(1.0),
            b: c.b.unwrap_or(0.0),
            mu_mode: c.mu_mode.clone().unwrap_or_else(|| "constant".into()),
            sigma_fn: c.sigma_fn.clone(),
            mu_fn: c.mu_fn.clone(),
        };
        m.to_spec().map_err(|e| usage("model", format!("{e:#}")))?;
        if m.model != "fbm" && m.sigma_fn.is_none() && !(m.sigma_scale() > 0.0) {
            return Err(usage("sigma", "must be positive"));
        }
        Ok(m)
    }

    fn hurst(&self, v: Option<f64>, flag: &str, estimable: bool) -> std::result::Result<HurstParam, CliError> {
        let h = HurstParam::new(require(&v, flag)?).map_err(|e| usage(flag, e))?;
        if estimable {
            h.require_estimable().map_err(|e| usage(flag, e))?;
        }
        Ok(h)
    }

    /// Grid step for windows up to `eps_max`, smallest window `eps_min`.
    fn dt(&self, eps_min: f64) -> std::result::Result<f64, CliError> {
        match &self.cfg.dt {
            Some(t) => parse_eps(t).map_err(|e| usage("dt", e)),
            None => Ok(eps_min / 16.0),
        }
    }
}

fn trajectory(env: &Env, h: HurstParam, model: &ModelConfig, eps_min: f64, eps_max: f64) -> Result<(Process, Process)> {
    let dt = env.dt(eps_min).map_err(|e| match e {
        CliError::Usage(m) => anyhow::anyhow!(m),
        CliError::Runtime(e) => e,
    })?;
    let grid = Grid::covering_unit_interval(eps_max, dt)?;
    let b = sample_fbm(h, grid.n, grid.t0, dt, env.seed)?.to_process();
    let x = match model.to_spec()? {
        None => b.clone(),
        Some(spec) => simulate(&spec, &b)?.process,
    };
    Ok((b, x))
}

fn cmd_simulate(env: &mut Env) -> std::result::Result<(), CliError> {
    let h = env.hurst(env.cfg.h, "h", false)?;
    let model = env.model("fbm")?;
    let eps = env.eps()?;
    let (_, x) = trajectory(env, h, &model, eps, eps)?;
    let format = env.cfg.format.clone().unwrap_or_else(|| "both".into());
    if !["fbm1", "csv", "both"].contains(&format.as_str()) {
        return Err(usage("format", "expected fbm1, csv or both"));
    }
    let tag = if model.model == "fbm" { h.value() } else { f64::NAN };
    if format != "csv" {
        let p = env.path("path.fbm1");
        save_fbm1(&p, tag, &x)?;
    }
    if format != "fbm1" {
        let w = env.create("path.csv")?;
        write_path_csv(w, &x)?;
    }
    env.write_json(
        "simulate.json",
        &json!({"model": model, "h": h.value(), "seed": env.seed, "t0": x.t0, "dt": x.dt, "n": x.values.len()}),
    )?;
    Ok(())
}

fn cmd_estimate(env: &mut Env) -> std::result::Result<(), CliError> {
    let estimator = env.cfg.estimator.clone().unwrap_or_else(|| "regression".into());
    let k = env.cfg.k.unwrap_or(2);
    if k < 1 {
        return Err(usage("k", "must be >= 1"));
    }
    let eps = env.eps()?;
    let scales = env.scales()?;
    let model = env.model("m4")?;
    let family = match model.to_spec().ok().flatten() {
        Some(s) if s.is_multiplicative() => Family::Multiplicative,
        _ => Family::Additive,
    };
    let scale_set = ScaleSet::new(eps, &scales).map_err(|e| usage("scales", e))?;
    let c_max = scales.iter().copied().fold(1.0, f64::max);
    let x = match &env.cfg.input {
        Some(p) => load_fbm1(p)?.process,
        None => {
            let h = env.hurst(env.cfg.h_true, "h-true", true)?;
            trajectory(env, h, &model, eps * scales.iter().copied().fold(1.0, f64::min), eps * c_max)?.1
        }
    };
    let h_known = env.cfg.h_known.or(env.cfg.h_true);
    let result = match estimator.as_str() {
        "regression" => {
            let spectrum = SpectralGrid::new(env.kernel);
            let est = estimate_h_sigma(&x, env.kernel, k as f64, &scale_set, family, &spectrum)?;
            let mut w = csv::Writer::from_writer(env.create("log_m.csv")?);
            w.write_record(["scale", "window", "log_m", "residual"]).map_err(anyhow::Error::from)?;
            for (i, c) in scales.iter().enumerate() {
                w.write_record([c.to_string(), (eps * c).to_string(), est.log_m[i].to_string(), est.residuals[i].to_string()])
                    .map_err(anyhow::Error::from)?;
            }
            w.flush().map_err(anyhow::Error::from)?;
            json!({
                "k": est.k, "h_hat": est.h_hat, "b_hat": est.b_hat,
                "sigma_hat_pow_k": est.sigma_hat_pow_k, "sigma_hat": est.sigma_hat,
                "sigma2h_hat_sq": est.sigma2h_hat_sq, "log_m": est.log_m,
                "residuals": est.residuals, "h_out_of_range": est.h_out_of_range,
                "weights_z": scale_set.z,
            })
        }
        "known-h" => {
            let h = env.hurst(h_known, "h-known", true)?;
            let s2 = env.cache.get(h.value(), env.kernel, k, &[])?.sigma2h_sq;
            let s = estimate_sigma_known_h(&x, env.kernel, k as f64, eps, h, s2, family)?;
            json!({"k": k, "h": h.value(), "sigma2h_sq": s2, "sigma_tilde": s})
        }
        "functional" => {
            let h = env.hurst(h_known, "h-known", true)?;
            let weight = ScalarFn::parse(env.cfg.weight_fn.as_deref().unwrap_or("const:1"))
                .map_err(|e| usage("weight-fn", e))?;
            let s2 = env.cache.get(h.value(), env.kernel, k, &[])?.sigma2h_sq;
            let sm = smooth(&x, env.kernel, eps, Orders::VALUE_AND_SECOND)?;
            let stat = functional_statistic(Order::Second, |v| weight.eval(v), k as f64, &sm, h, s2)?;
            json!({"k": k, "h": h.value(), "weight_fn": weight.to_string(), "statistic": stat})
        }
        "pointwise" => {
            let h = env.hurst(h_known, "h-known", true)?;
            let s2 = env.cache.get(h.value(), env.kernel, k, &[])?.sigma2h_sq;
            let sm = smooth(&x, env.kernel, eps, Orders::VALUE_AND_SECOND)?;
            let xv = sm.value()?;
            let lo = xv.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bw = env.cfg.bandwidth.unwrap_or(0.1 * (hi - lo).max(1e-12));
            let grid: Vec<f64> = (0..21).map(|i| lo + (hi - lo) * i as f64 / 20.0).collect();
            let sig = pointwise_sigma(&sm, k as f64, h, s2, &grid, bw, 0.01).map_err(|e| usage("bandwidth", e))?;
            let mut w = csv::Writer::from_writer(env.create("pointwise.csv")?);
            w.write_record(["x", "sigma_hat"]).map_err(anyhow::Error::from)?;
            for (x0, s) in grid.iter().zip(&sig) {
                w.write_record([x0.to_string(), s.map(|v| v.to_string()).unwrap_or_default()])
                    .map_err(anyhow::Error::from)?;
            }
            w.flush().map_err(anyhow::Error::from)?;
            json!({"k": k, "h": h.value(), "bandwidth": bw, "x": grid, "sigma_hat": sig})
        }
        other => return Err(usage("estimator", format!("unknown estimator `{other}`"))),
    };
    env.write_json("estimate.json", &json!({"estimator": estimator, "model": model, "seed": env.seed, "eps": eps, "scales": scales, "result": result}))?;
    Ok(())
}

fn test_config(env: &Env) -> std::result::Result<TestConfig, CliError> {
    let c = &env.cfg;
    let sigma0 = require(&c.sigma0, "sigma0")?;
    if !(sigma0 > 0.0) {
        return Err(usage("sigma0", "must be positive"));
    }
    let t = TestConfig {
        variant: c.variant.clone().unwrap_or_else(|| "f_const".into()),
        sigma0,
        d: c.d.unwrap_or(0.0),
        alpha: c.alpha.unwrap_or(0.05),
        f_shift: c.f_shift.clone().unwrap_or_else(|| "identity".into()),
        mu_mode: c.mu_mode.clone().unwrap_or_else(|| "constant".into()),
        mu: c.mu.unwrap_or(0.0),
        c: c.c.unwrap_or(1.0),
    };
    hypothesis::Variant::parse(&t.variant).map_err(|e| usage("variant", e))?;
    hypothesis::ShiftFn::parse(&t.f_shift).map_err(|e| usage("f-shift", e))?;
    parse_mu_mode(&t.mu_mode).map_err(|e| usage("mu-mode", e))?;
    if !(t.alpha > 0.0 && t.alpha < 1.0) {
        return Err(usage("alpha", "must lie in (0, 1)"));
    }
    if !(t.d >= 0.0) {
        return Err(usage("d", "must be non-negative"));
    }
    Ok(t)
}

fn cmd_test(env: &mut Env) -> std::result::Result<(), CliError> {
    let t = test_config(env)?;
    let h = env.hurst(Some(env.cfg.h.unwrap_or(0.7)), "h", true)?;
    let eps = env.eps()?;
    let replicates = env.cfg.replicates.unwrap_or(1);
    if replicates == 0 {
        return Err(usage("replicates", "must be positive"));
    }
    let spec = t.to_spec(h.value()).map_err(|e| usage("variant", format!("{e:#}")))?;
    let k = spec.variant.k();
    let consts = env.cache.get(h.value(), env.kernel, k, &[])?;
    let dt = env.dt(eps)?;
    let grid = Grid::covering_unit_interval(eps, dt)?;
    let synth = fbmest_core::fbm::FbmSynthesizer::new(h, grid.n, grid.t0, dt)?;
    let reports: Vec<TestReport> = (0..replicates)
        .map(|i| {
            let seed = env.seed.wrapping_add(i as u64);
            let b = synth.sample(seed).to_process();
            let mut r = hypothesis::run_on_path(&spec, &b, env.kernel, eps, consts.sigma2h_sq, consts.sigma_gk_sq)?;
            r.replicate = Some(i);
            r.seed = Some(seed);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let rate = reports.iter().filter(|r| r.reject).count() as f64 / replicates as f64;
    let report_json: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({"statistic": r.statistic, "center": r.center, "scale": r.scale, "p_value": r.p_value,
                   "reject": r.reject, "replicate": r.replicate, "seed": r.seed, "note": r.note})
        })
        .collect();
    env.write_json(
        "test_report.json",
        &json!({"variant": t.variant, "sigma0": t.sigma0, "d": t.d, "alpha": t.alpha, "h": h.value(), "eps": eps,
                "critical_value": critical_value(t.alpha), "sigma_g_sq": consts.sigma_gk_sq,
                "rejection_rate": rate, "reports": report_json}),
    )?;
    if replicates >= 100 {
        let d_values = match &env.cfg.d_values {
            Some(s) => parse_list_nonneg(s).map_err(|e| usage("d-values", e))?,
            None => vec![0.0, 1.0, 2.0, 3.0, 5.0],
        };
        let curve = power_curve(&t, h.value(), env.kernel, &d_values, replicates, eps, env.seed, &env.cache)?;
        let w = env.create("power_curve.csv")?;
        curve.write_csv(w)?;
        env.write_json("power_curve.json", &curve)?;
    }
    Ok(())
}

fn parse_list_nonneg(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            let x: f64 = v.trim().parse().with_context(|| format!("`{v}` is not a number"))?;
            anyhow::ensure!(x >= 0.0, "d values must be non-negative");
            Ok(x)
        })
        .collect()
}

fn cmd_mc(env: &mut Env) -> std::result::Result<(), CliError> {
    let name = require(&env.cfg.experiment, "experiment")?;
    let mut exp: Experiment = if Path::new(&name).is_file() {
        let text = std::fs::read_to_string(&name).map_err(|e| usage("experiment", e))?;
        toml::from_str(&text).map_err(|e| usage("experiment", e))?
    } else {
        mc::builtin(&name).map_err(|e| usage("experiment", e))?
    };
    if let Some(s) = env.cfg.seed {
        exp.base_seed = s;
    }
    if let Some(r) = env.cfg.replicates {
        exp.replicates = r;
    }
    if let Some(k) = &env.cfg.kernel {
        exp.kernel = k.clone();
    }
    exp.validate().map_err(|e| usage("experiment", format!("{e:#}")))?;
    let summary = run_experiment(&exp, &env.cache)?;
    env.write_json("mc_summary.json", &json!({"experiment": exp, "summary": summary}))?;
    let w = env.create("mc_long.csv")?;
    summary.write_long_csv(w)?;
    Ok(())
}

fn cmd_constants(env: &mut Env) -> std::result::Result<(), CliError> {
    let h = env.hurst(env.cfg.h, "h", false)?;
    let k = env.cfg.k.unwrap_or(2);
    if k < 1 {
        return Err(usage("k", "must be >= 1"));
    }
    let scales = match &env.cfg.scales {
        Some(s) => parse_list(s).map_err(|e| usage("scales", e))?,
        None => Vec::new(),
    };
    let c = env.cache.get(h.value(), env.kernel, k, &scales)?;
    let mut rows: Vec<(String, f64)> = vec![
        ("v2h_sq".into(), c.v2h_sq),
        ("sigma2h_sq".into(), c.sigma2h_sq),
        ("sigma2h_sq_time_domain".into(), c.sigma2h_sq_time_domain),
        ("sigma_tilde2h_sq".into(), c.sigma_tilde2h_sq),
        ("sigma_tilde2h_sq_time_domain".into(), c.sigma_tilde2h_sq_time_domain),
        (format!("sigma_g{k}_sq"), c.sigma_gk_sq),
        (format!("sigma_g{k}_sq_error_bound"), c.sigma_gk_truncation),
    ];
    for (n, g) in c.hermite.iter().enumerate() {
        rows.push((format!("ghat_{}_{k}", 2 * n + 2), *g));
    }
    for (i, ci) in c.scales.iter().enumerate() {
        for (j, cj) in c.scales.iter().enumerate().skip(i) {
            rows.push((format!("rho_g{k}({ci},{cj})"), c.scale_covariance[i][j]));
        }
    }
    if c.scales.len() >= 2 {
        rows.push((format!("sigma_g{k}_l_sq"), c.regression_variance()?));
    }
    let mut text = String::from("name,value\n");
    for (n, v) in &rows {
        text.push_str(&format!("\"{n}\",{v}\n"));
    }
    print!("{text}");
    let p = env.path("constants.csv");
    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), CliError> {
    let file = match &cli.opts.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let cfg = merge(&file, &cli.opts)?;
    let kernel = Kernel::builtin(cfg.kernel.as_deref().unwrap_or("second_difference")).map_err(|e| usage("kernel", e))?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(usage("threads", "must be positive"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| usage("out", format!("{}: {e}", out.display())))?;
    let cache = match &cfg.cache_dir {
        Some(d) => ConstantsCache::at(d),
        None => ConstantsCache::default_location(),
    };
    let mut env = Env { seed: cfg.seed.unwrap_or(0), cfg, out, kernel, cache, outputs: Vec::new() };
    match cli.command {
        Command::Simulate => cmd_simulate(&mut env)?,
        Command::Estimate => cmd_estimate(&mut env)?,
        Command::Test => cmd_test(&mut env)?,
        Command::Mc => cmd_mc(&mut env)?,
        Command::Constants => cmd_constants(&mut env)?,
    }
    let mut resolved = env.cfg.clone();
    resolved.seed = Some(env.seed);
    resolved.kernel = Some(env.kernel.name().into());
    resolved.out = None;
    resolved.cache_dir = None;
    std::fs::write(env.out.join("run.toml"), toml::to_string(&resolved).map_err(anyhow::Error::from)?)
        .context("writing run.toml")?;
    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": env.seed,
        "config": resolved,
        "outputs": env.outputs,
    });
    std::fs::write(env.out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .context("writing manifest.json")?;
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunConfig = toml::from_str("h = 0.6\nsigma0 = 2.0\nkernel = \"c2_bump\"\n").unwrap();
        let flags = RunConfig { h: Some(0.8), ..Default::default() };
        let m = merge(&file, &flags).unwrap();
        assert_eq!(m.h, Some(0.8));
        assert_eq!(m.sigma0, Some(2.0));
        assert_eq!(m.kernel.as_deref(), Some("c2_bump"));
    }

    #[test]
    fn config_roundtrip_and_unknown_keys() {
        let c = RunConfig { h: Some(0.7), eps: Some("2^-9".into()), seed: Some(3), ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
        assert!(toml::from_str::<RunConfig>("hurst = 0.7\n").is_err());
    }

    #[test]
    fn bad_flag_is_usage_error() {
        assert_eq!(main_with_args(["fbmest", "constants", "--bogus"]), 2);
        assert_eq!(main_with_args(["fbmest", "constants", "--kernel", "box", "--h", "0.7"]), 2);
    }
}
