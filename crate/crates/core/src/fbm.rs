//! Fractional Brownian motion: covariance, exact synthesis on a uniform grid,
//! and grid-valued processes extended to negative times.
//!
//! Normalization: `E[b_H(t) b_H(s)] = ½ v²_{2H} (|t|^{2H} + |s|^{2H} - |t-s|^{2H})`
//! with `v²_{2H} = 1 / (Γ(2H+1) sin(πH))`, which makes the spectral density of
//! `b_H` equal to `|x|^{-1-2H} / 2π`.

use crate::fft::FftPlan;
use crate::special::gamma;
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[allow(unused_imports)]
use num_traits::Float;

/// Hurst index `H ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(HurstParam(h))
        } else {
            Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {h}")))
        }
    }

    /// Estimators require `1/2 < H < 1`.
    pub fn for_estimation(h: f64) -> Result<Self> {
        let p = Self::new(h)?;
        p.require_estimable()?;
        Ok(p)
    }

    pub fn require_estimable(self) -> Result<()> {
        if self.0 > 0.5 {
            Ok(())
        } else {
            Err(Error::Domain(format!("estimators need 1/2 < H < 1, got {}", self.0)))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `v²_{2H} = [Γ(2H+1) sin(πH)]^{-1}`.
pub fn v2h_sq(h: HurstParam) -> f64 {
    let h = h.value();
    1.0 / (gamma(2.0 * h + 1.0) * (PI * h).sin())
}

pub fn fbm_covariance(t: f64, s: f64, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * v2h_sq(h) * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance at integer `lag` of the increments `b_H(t+dt) - b_H(t)`.
pub fn fgn_autocovariance(h: HurstParam, dt: f64, lag: usize) -> f64 {
    let two_h = 2.0 * h.value();
    let j = lag as f64;
    let second = (j + 1.0).powf(two_h) - 2.0 * j.powf(two_h) + (j - 1.0).abs().powf(two_h);
    0.5 * v2h_sq(h) * dt.powf(two_h) * second
}

/// Uniform grid `t_i = t0 + i·dt`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    /// Grid covering `[-2·eps_max, 1 + 2·eps_max]` with step `dt`; `1/dt` and
    /// `eps_max/dt` must be integers.
    pub fn covering_unit_interval(eps_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(eps_max > 0.0) {
            return Err(Error::arg("dt", "grid step and eps_max must be positive"));
        }
        let per_unit = steps_exact(1.0, dt).ok_or_else(|| {
            Error::Grid(format!("dt = {dt} does not divide the unit interval"))
        })?;
        let pad = (2.0 * eps_max / dt - 1e-9).ceil() as usize;
        Ok(Grid { t0: -(pad as f64) * dt, dt, n: 2 * pad + per_unit + 1 })
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Index of the grid node equal to `t` (up to rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t - self.t0) / self.dt;
        let r = k.round();
        if (k - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < self.n {
            Some(r as usize)
        } else {
            None
        }
    }
}

/// `Some(k)` when `len = k·dt` for an integer `k` (relative tolerance 1e-9).
pub fn steps_exact(len: f64, dt: f64) -> Option<usize> {
    let k = (len / dt).round();
    if k >= 0.0 && (k * dt - len).abs() <= 1e-9 * len.abs().max(dt) {
        Some(k as usize)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisBackend {
    CirculantEmbedding,
    Cholesky,
}

/// A sampled trajectory of `b_H` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub h: HurstParam,
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub backend: SynthesisBackend,
}

impl FbmPath {
    pub fn grid(&self) -> Grid {
        Grid { t0: self.t0, dt: self.dt, n: self.values.len() }
    }

    pub fn to_process(&self) -> Process {
        Process { t0: self.t0, dt: self.dt, values: self.values.clone() }
    }
}

/// A real process sampled on a uniform grid (a path of `b_H` or a model
/// trajectory built from one).
#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Process {
    pub fn grid(&self) -> Grid {
        Grid { t0: self.t0, dt: self.dt, n: self.values.len() }
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn zero_index(&self) -> Result<usize> {
        self.grid()
            .index_of(0.0)
            .ok_or_else(|| Error::Grid(format!("grid starting at {} does not contain 0", self.t0)))
    }

    /// Applies `f(t, x)` pointwise.
    pub fn map(&self, mut f: impl FnMut(f64, f64) -> f64) -> Process {
        let values = self.values.iter().enumerate().map(|(i, &x)| f(self.time(i), x)).collect();
        Process { t0: self.t0, dt: self.dt, values }
    }
}

/// `X(t) = c` for every grid time `t < 0`; values at `t ≥ 0` untouched.
pub fn extend_path(process: &Process, c: f64) -> Process {
    let tol = 1e-9 * process.dt;
    process.map(|t, x| if t < -tol { c } else { x })
}

/// Exact fBm sampler for a fixed grid; the circulant eigenvalues are computed
/// once and reused for every seed.
#[derive(Debug, Clone)]
pub struct FbmSynthesizer {
    h: HurstParam,
    grid: Grid,
    zero_index: usize,
    inner: Backend,
}

#[derive(Debug, Clone)]
enum Backend {
    Circulant { plan: FftPlan, sqrt_eigen: Vec<f64> },
    Cholesky { lower: Vec<f64> },
}

/// Eigenvalues below `-EIGEN_TOL·max λ` reject the circulant embedding.
pub const EIGEN_TOL: f64 = 1e-10;

impl FbmSynthesizer {
    pub fn new(h: HurstParam, n: usize, t0: f64, dt: f64) -> Result<Self> {
        Self::build(h, n, t0, dt, None)
    }

    /// Forces a backend; Cholesky is `O(n³)` and meant for small grids.
    pub fn with_backend(h: HurstParam, n: usize, t0: f64, dt: f64, backend: SynthesisBackend) -> Result<Self> {
        Self::build(h, n, t0, dt, Some(backend))
    }

    fn build(h: HurstParam, n: usize, t0: f64, dt: f64, force: Option<SynthesisBackend>) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg("n", format!("need at least 2 grid points, got {n}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg("dt", format!("grid step must be positive, got {dt}")));
        }
        let grid = Grid { t0, dt, n };
        let zero_index = grid
            .index_of(0.0)
            .ok_or_else(|| Error::Grid(format!("grid t0={t0}, dt={dt}, n={n} does not contain 0")))?;
        let inc = n - 1;
        let gamma: Vec<f64> = (0..inc).map(|j| fgn_autocovariance(h, dt, j)).collect();
        let inner = match force {
            Some(SynthesisBackend::Cholesky) => Backend::Cholesky { lower: cholesky_toeplitz(&gamma)? },
            _ => match circulant_sqrt_eigen(inc, |j| fgn_autocovariance(h, dt, j)) {
                Some((plan, sqrt_eigen)) => Backend::Circulant { plan, sqrt_eigen },
                None if force.is_none() => Backend::Cholesky { lower: cholesky_toeplitz(&gamma)? },
                None => {
                    return Err(Error::Numerical(
                        "circulant embedding has negative eigenvalues".into(),
                    ))
                }
            },
        };
        Ok(FbmSynthesizer { h, grid, zero_index, inner })
    }

    pub fn backend(&self) -> SynthesisBackend {
        match self.inner {
            Backend::Circulant { .. } => SynthesisBackend::CirculantEmbedding,
            Backend::Cholesky { .. } => SynthesisBackend::Cholesky,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Stationary increments of length `n - 1`, deterministic in `seed`.
    pub fn sample_increments(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inc = self.grid.n - 1;
        match &self.inner {
            Backend::Circulant { plan, sqrt_eigen } => {
                let mut w: Vec<Complex64> = sqrt_eigen
                    .iter()
                    .map(|s| {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(a * s, b * s)
                    })
                    .collect();
                plan.forward(&mut w);
                w.truncate(inc);
                w.into_iter().map(|z| z.re).collect()
            }
            Backend::Cholesky { lower } => {
                let z: Vec<f64> = (0..inc).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..inc).map(|i| (0..=i).map(|j| lower[i * inc + j] * z[j]).sum()).collect()
            }
        }
    }

    pub fn sample(&self, seed: u64) -> FbmPath {
        let inc = self.sample_increments(seed);
        let n = self.grid.n;
        let mut values = vec![0.0; n];
        for j in self.zero_index + 1..n {
            values[j] = values[j - 1] + inc[j - 1];
        }
        for j in (0..self.zero_index).rev() {
            values[j] = values[j + 1] - inc[j];
        }
        FbmPath {
            h: self.h,
            t0: self.grid.t0,
            dt: self.grid.dt,
            values,
            seed,
            backend: self.backend(),
        }
    }

    /// Increment autocovariance actually realized by the sampler, lags `0..n-1`.
    pub fn implied_increment_autocovariance(&self) -> Vec<f64> {
        let inc = self.grid.n - 1;
        match &self.inner {
            Backend::Circulant { plan, sqrt_eigen } => {
                let len = plan.len();
                // first row of the circulant = (1/L) Σ_k λ_k e^{2πijk/L}; λ real and symmetric
                let mut w: Vec<Complex64> =
                    sqrt_eigen.iter().map(|s| Complex64::new(s * s * len as f64, 0.0)).collect();
                plan.forward(&mut w);
                w.iter().take(inc).map(|z| z.re / len as f64).collect()
            }
            Backend::Cholesky { lower } => {
                (0..inc).map(|j| lower[j * inc] * lower[0]).collect()
            }
        }
    }
}

/// `sqrt(λ_k / L)` for the power-of-two circulant embedding of the first `m`
/// lags of `gamma`, or `None` when an eigenvalue is negative beyond tolerance.
fn circulant_sqrt_eigen(m: usize, gamma: impl Fn(usize) -> f64) -> Option<(FftPlan, Vec<f64>)> {
    let len = (2 * m.max(2) - 2).next_power_of_two().max(2);
    let half = len / 2;
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for j in 0..=half {
        row[j] = Complex64::new(gamma(j), 0.0);
    }
    for j in 1..half {
        row[len - j] = row[j];
    }
    let plan = FftPlan::new(len);
    plan.forward(&mut row);
    let max = row.iter().map(|z| z.re).fold(0.0, f64::max);
    if row.iter().any(|z| z.re < -EIGEN_TOL * max) {
        return None;
    }
    let sqrt_eigen = row.iter().map(|z| (z.re.max(0.0) / len as f64).sqrt()).collect();
    Some((plan, sqrt_eigen))
}

fn cholesky_toeplitz(gamma: &[f64]) -> Result<Vec<f64>> {
    let n = gamma.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = gamma[i - j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numerical(format!("covariance not positive definite at row {i}")));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// One exact fBm path on `t_i = t0 + i·dt`, anchored so that `b_H(0) = 0`.
pub fn sample_fbm(h: HurstParam, n: usize, t0: f64, dt: f64, seed: u64) -> Result<FbmPath> {
    Ok(FbmSynthesizer::new(h, n, t0, dt)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(h: f64) -> HurstParam {
        HurstParam::new(h).unwrap()
    }

    #[test]
    fn v2h_brownian_case() {
        assert!((v2h_sq(hp(0.5)) - 1.0).abs() < 1e-14);
        for h in [0.55, 0.7, 0.9] {
            let v = v2h_sq(hp(h));
            assert!(v.is_finite() && v > 0.0);
        }
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(fbm_covariance(1.0, 0.0, hp(0.7)), 0.0);
        assert!((fbm_covariance(1.0, 1.0, hp(0.5)) - 1.0).abs() < 1e-14);
        assert!((fbm_covariance(2.0, 1.0, hp(0.5)) - 1.0).abs() < 1e-14);
        let h = hp(0.8);
        assert!((fbm_covariance(0.7, 0.7, h) - v2h_sq(h) * 0.7f64.powf(1.6)).abs() < 1e-14);
    }

    #[test]
    fn hurst_domain() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::for_estimation(0.5).is_err());
        assert!(HurstParam::for_estimation(0.51).is_ok());
    }

    #[test]
    fn path_is_anchored_and_deterministic() {
        let p1 = sample_fbm(hp(0.7), 300, -0.25, 1.0 / 256.0, 42).unwrap();
        let p2 = sample_fbm(hp(0.7), 300, -0.25, 1.0 / 256.0, 42).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.values[64], 0.0);
        assert_eq!(p1.backend, SynthesisBackend::CirculantEmbedding);
        let p3 = sample_fbm(hp(0.7), 300, -0.25, 1.0 / 256.0, 43).unwrap();
        assert_ne!(p1.values, p3.values);
    }

    #[test]
    fn grid_must_contain_zero() {
        assert!(sample_fbm(hp(0.7), 10, 0.05, 0.1, 1).is_err());
        assert!(sample_fbm(hp(0.7), 1, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn extension_sets_left_value() {
        let p = Process { t0: -0.5, dt: 0.25, values: vec![1.0, 2.0, 3.0, 4.0] };
        let e = extend_path(&p, 3.0);
        assert_eq!(e.values, vec![3.0, 3.0, 3.0, 4.0]);
        let e0 = extend_path(&p, 0.0);
        assert_eq!(e0.values[1], 0.0);
        assert_eq!(e0.values[2], 3.0);
    }

    #[test]
    fn embedding_reproduces_target_autocovariance() {
        for h in [0.3, 0.5, 0.7, 0.95] {
            let s = FbmSynthesizer::new(hp(h), 33, 0.0, 0.125).unwrap();
            let implied = s.implied_increment_autocovariance();
            for (j, v) in implied.iter().enumerate() {
                let target = fgn_autocovariance(hp(h), 0.125, j);
                assert!((v - target).abs() < 1e-12, "h={h} lag={j}: {v} vs {target}");
            }
        }
    }

    #[test]
    fn grid_covering_unit_interval() {
        let g = Grid::covering_unit_interval(1.0 / 256.0, 1.0 / 4096.0).unwrap();
        assert_eq!(g.index_of(0.0), Some(32));
        assert!(g.index_of(1.0 + 2.0 / 256.0).is_some());
        assert!(Grid::covering_unit_interval(0.01, 0.3).is_err());
    }
}
