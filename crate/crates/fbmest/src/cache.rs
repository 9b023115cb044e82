//! On-disk memo of the constants for one `(h, kernel, k, scales)` cell.
//!
//! Records are JSON files named by the SHA-256 of the cell key. Writes go to
//! a temporary file in the cache directory and are renamed into place, so
//! concurrent readers see either nothing or a complete record.

use anyhow::{Context, Result};
use fbmest_core::constants::{default_series, spectral_variance, HermiteSeries, Order, ScaleCovariance};
use fbmest_core::estimators::ScaleSet;
use fbmest_core::fbm::v2h_sq;
use fbmest_core::{HurstParam, Kernel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

const FORMAT: &str = "fbmest-constants-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConstants {
    pub h: f64,
    pub kernel: String,
    pub k: u32,
    pub scales: Vec<f64>,
    pub v2h_sq: f64,
    pub sigma2h_sq: f64,
    pub sigma2h_sq_time_domain: f64,
    pub sigma_tilde2h_sq: f64,
    pub sigma_tilde2h_sq_time_domain: f64,
    /// `ĝ_{2n,k}`, `n = 1, 2, ...`
    pub hermite: Vec<f64>,
    pub sigma_gk_sq: f64,
    pub sigma_gk_truncation: f64,
    /// `ρ_{g_k}(c_i, c_j)`; empty for fewer than two scales.
    pub scale_covariance: Vec<Vec<f64>>,
}

impl CellConstants {
    pub fn compute(h: f64, kernel: Kernel, k: u32, scales: &[f64]) -> Result<CellConstants> {
        let hp = HurstParam::new(h)?;
        let s2 = spectral_variance(Order::Second, hp, kernel)?;
        let s1 = spectral_variance(Order::First, hp, kernel)?;
        let series: HermiteSeries = default_series(k)?;
        let sg = fbmest_core::constants::sigma_g_sq(&series, hp, kernel, s2.fourier)?;
        let scale_covariance = if scales.len() >= 2 {
            ScaleCovariance::compute(scales, &series, hp, kernel, s2.fourier)?.matrix
        } else {
            Vec::new()
        };
        Ok(CellConstants {
            h,
            kernel: kernel.name().to_string(),
            k,
            scales: scales.to_vec(),
            v2h_sq: v2h_sq(hp),
            sigma2h_sq: s2.fourier,
            sigma2h_sq_time_domain: s2.time_domain,
            sigma_tilde2h_sq: s1.fourier,
            sigma_tilde2h_sq_time_domain: s1.time_domain,
            hermite: series.coeffs.clone(),
            sigma_gk_sq: sg.value,
            sigma_gk_truncation: sg.truncation_error + sg.tail_error,
            scale_covariance,
        })
    }

    /// `Σ d_i d_j ρ_{g_k}(c_i, c_j)`.
    pub fn quadratic_form(&self, d: &[f64]) -> Result<f64> {
        anyhow::ensure!(d.len() == self.scales.len(), "need one weight per scale");
        let cov = ScaleCovariance { scales: self.scales.clone(), matrix: self.scale_covariance.clone() };
        Ok(cov.quadratic_form(d)?)
    }

    /// `σ²_{g_k,ℓ}(c, √c z/k)`, the limiting variance of `(Ĥ_k - H)/√ε`.
    pub fn regression_variance(&self) -> Result<f64> {
        let scales = ScaleSet::new(1.0, &self.scales)?;
        self.quadratic_form(&scales.h_weights(self.k as f64))
    }
}

fn cell_key(h: f64, kernel: Kernel, k: u32, scales: &[f64]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(FORMAT.as_bytes());
    hasher.update(h.to_bits().to_le_bytes());
    hasher.update(kernel.name().as_bytes());
    hasher.update(k.to_le_bytes());
    for c in scales {
        hasher.update(c.to_bits().to_le_bytes());
    }
    format!("{:x}", hasher.finalize())
}

/// Memo backed by a directory (or memory only when `dir` is `None`).
#[derive(Debug, Default)]
pub struct ConstantsCache {
    dir: Option<PathBuf>,
    memo: Mutex<HashMap<String, CellConstants>>,
}

impl ConstantsCache {
    pub fn in_memory() -> ConstantsCache {
        ConstantsCache::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> ConstantsCache {
        ConstantsCache { dir: Some(dir.into()), memo: Mutex::default() }
    }

    /// `$FBMEST_CACHE_DIR`, or `fbmest-constants` under the temp directory.
    pub fn default_location() -> ConstantsCache {
        let dir = std::env::var_os("FBMEST_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("fbmest-constants"));
        ConstantsCache::at(dir)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, h: f64, kernel: Kernel, k: u32, scales: &[f64]) -> Result<CellConstants> {
        let key = cell_key(h, kernel, k, scales);
        if let Some(c) = self.memo.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let file = self.dir.as_ref().map(|d| d.join(format!("{key}.json")));
        if let Some(f) = &file {
            if let Ok(text) = std::fs::read_to_string(f) {
                if let Ok(c) = serde_json::from_str::<CellConstants>(&text) {
                    self.memo.lock().unwrap().insert(key, c.clone());
                    return Ok(c);
                }
            }
        }
        let c = CellConstants::compute(h, kernel, k, scales)
            .with_context(|| format!("computing constants for h = {h}, kernel {}, k = {k}", kernel.name()))?;
        if let (Some(dir), Some(f)) = (&self.dir, &file) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(serde_json::to_string_pretty(&c)?.as_bytes())?;
            tmp.persist(f).map_err(|e| e.error)?;
        }
        self.memo.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }
}
