//! Serializable descriptions of models and value parsers shared by the CLI,
//! config files and experiment definitions.

use anyhow::{bail, Context, Result};
use fbmest_core::models::{ModelSpec, MuMode, ScalarFn};
use serde::{Deserialize, Serialize};

/// A model by name with its scalar parameters. `fbm` means the driving path itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    /// `constant` or `linear` drift for `affine`.
    #[serde(default = "constant")]
    pub mu_mode: String,
    /// Catalog function for `general`/`euler`, e.g. `sin_offset:2.0`.
    #[serde(default)]
    pub sigma_fn: Option<String>,
    #[serde(default)]
    pub mu_fn: Option<String>,
}

fn one() -> f64 {
    1.0
}

fn constant() -> String {
    "constant".into()
}

pub const MODEL_NAMES: [&str; 8] = ["fbm", "m4", "m5", "m6", "m7", "general", "affine", "euler"];

pub fn parse_mu_mode(text: &str) -> Result<MuMode> {
    match text {
        "constant" => Ok(MuMode::Constant),
        "linear" => Ok(MuMode::Linear),
        other => bail!("unknown drift mode `{other}` (expected constant or linear)"),
    }
}

impl ModelConfig {
    pub fn named(model: &str, sigma: f64, mu: f64, c: f64) -> ModelConfig {
        ModelConfig {
            model: model.into(),
            sigma,
            mu,
            c,
            a: 1.0,
            b: 0.0,
            mu_mode: constant(),
            sigma_fn: None,
            mu_fn: None,
        }
    }

    pub fn fbm() -> ModelConfig {
        ModelConfig::named("fbm", 1.0, 0.0, 0.0)
    }

    /// `None` for the raw driving path.
    pub fn to_spec(&self) -> Result<Option<ModelSpec>> {
        let (sigma, mu, c) = (self.sigma, self.mu, self.c);
        let catalog = |text: &Option<String>, flag: &str| -> Result<ScalarFn> {
            let text = text.as_deref().with_context(|| format!("model `{}` needs {flag}", self.model))?;
            Ok(ScalarFn::parse(text)?)
        };
        let spec = match self.model.as_str() {
            "fbm" => return Ok(None),
            "m4" => ModelSpec::Additive { sigma, mu, c },
            "m5" => ModelSpec::OrnsteinUhlenbeck { sigma, mu, c },
            "m6" => ModelSpec::Geometric { sigma, mu, c },
            "m7" => ModelSpec::Mixed { sigma, mu, c },
            "general" => ModelSpec::GeneralMuZero { sigma: catalog(&self.sigma_fn, "sigma_fn")?, c },
            "affine" => {
                ModelSpec::Affine { a: self.a, b: self.b, mu_mode: parse_mu_mode(&self.mu_mode)?, mu, c }
            }
            "euler" => ModelSpec::GeneralEuler {
                sigma: catalog(&self.sigma_fn, "sigma_fn")?,
                mu: catalog(&self.mu_fn, "mu_fn")?,
                c,
            },
            other => bail!("unknown model `{other}` (expected one of {})", MODEL_NAMES.join(", ")),
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    /// The constant `σ` scaling `Ẍ_ε`, when the model has one.
    pub fn sigma_scale(&self) -> f64 {
        match self.model.as_str() {
            "fbm" => 1.0,
            "affine" => self.a,
            _ => self.sigma,
        }
    }
}

/// A bandwidth given as a decimal or as `2^-9`.
pub fn parse_eps(text: &str) -> Result<f64> {
    let t = text.trim();
    let v = if let Some((base, exp)) = t.split_once('^') {
        let base: f64 = base.trim().parse().with_context(|| format!("bad base in `{t}`"))?;
        let exp: i32 = exp.trim().parse().with_context(|| format!("bad exponent in `{t}`"))?;
        base.powi(exp)
    } else {
        t.parse().with_context(|| format!("`{t}` is not a number"))?
    };
    if !(v > 0.0 && v.is_finite()) {
        bail!("bandwidth must be positive, got {v}");
    }
    Ok(v)
}

/// Comma-separated list of numbers (bandwidth syntax allowed).
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_eps).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_forms() {
        assert_eq!(parse_eps("2^-9").unwrap(), 0.001953125);
        assert_eq!(parse_eps("0.001953125").unwrap(), 2f64.powi(-9));
        assert!(parse_eps("-1").is_err());
        assert!(parse_eps("2^x").is_err());
        assert_eq!(parse_list("1,2, 4").unwrap(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn models_resolve() {
        assert!(ModelConfig::fbm().to_spec().unwrap().is_none());
        let m6 = ModelConfig::named("m6", 1.5, 0.3, 1.0).to_spec().unwrap().unwrap();
        assert!(m6.is_multiplicative());
        assert!(ModelConfig::named("general", 1.0, 0.0, 1.0).to_spec().is_err());
        assert!(ModelConfig::named("m9", 1.0, 0.0, 1.0).to_spec().is_err());
        let text = "model = \"m4\"\nsigma = 2.0\nmu = 0.5\n";
        let cfg: ModelConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg, ModelConfig::named("m4", 2.0, 0.5, 1.0));
        assert!(toml::from_str::<ModelConfig>("model = \"m4\"\nsgima = 2.0\n").is_err());
    }
}
