//! Monte Carlo checks of the smoothed fBm against its exact correlation structure.

use fbmest_core::constants::{default_series, gaussian_abs_moment, rho_h, sigma_g_sq, spectral_variance, Order};
use fbmest_core::fbm::{FbmSynthesizer, Grid};
use fbmest_core::kernel::{smooth, z_process, Orders};
use fbmest_core::stats::{mean, trapezoid};
use fbmest_core::{HurstParam, Kernel};

#[test]
fn empirical_lag_correlation_matches_rho() {
    let h = HurstParam::new(0.7).unwrap();
    for kernel in Kernel::ALL {
        let dt = 1.0 / 2048.0;
        let eps = 32.0 * dt;
        let g = Grid::covering_unit_interval(eps, dt).unwrap();
        let synth = FbmSynthesizer::new(h, g.n, g.t0, dt).unwrap();
        let s2 = spectral_variance(Order::Second, h, kernel).unwrap().value();
        for x in [0.0, 0.5, 1.0, 2.0] {
            let lag = (x * 32.0) as usize;
            let corrs: Vec<f64> = (0..100)
                .map(|seed| {
                    let p = synth.sample(seed).to_process();
                    let z = z_process(&smooth(&p, kernel, eps, Orders::SECOND).unwrap(), h, s2).unwrap();
                    let n = z.len() - lag;
                    z[..n].iter().zip(&z[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
                })
                .collect();
            let emp = mean(&corrs);
            let theory = rho_h(x, 1.0, 1.0, h, kernel, s2).unwrap();
            // 5% of ρ(0) = 1; the Monte Carlo standard error here is about 0.016
            assert!((emp - theory).abs() <= 0.05, "{} x={x}: empirical {emp}, theory {theory}", kernel.name());
        }
    }
}

#[test]
fn moments_of_z_converge_on_a_fixed_path() {
    let h = HurstParam::new(0.7).unwrap();
    let kernel = Kernel::SecondDifference;
    let dt = 2f64.powi(-14);
    let g = Grid::covering_unit_interval(2f64.powi(-6), dt).unwrap();
    let p = FbmSynthesizer::new(h, g.n, g.t0, dt).unwrap().sample(5).to_process();
    let s2 = spectral_variance(Order::Second, h, kernel).unwrap().value();
    for k in [1.0, 2.0, 3.0, 4.0] {
        // ∫ g_k(Z_ε) has standard deviation close to √(ε σ²_{g_k})
        let sg = sigma_g_sq(&default_series(k as u32).unwrap(), h, kernel, s2).unwrap().value;
        let bound = 3.0 * (2f64.powi(-10) * sg).sqrt();
        let target = gaussian_abs_moment(k).unwrap();
        let errs: Vec<f64> = [6, 8, 10]
            .iter()
            .map(|j| {
                let s = smooth(&p, kernel, 2f64.powi(-j), Orders::SECOND).unwrap();
                let z: Vec<f64> = z_process(&s, h, s2).unwrap().iter().map(|v| v.abs().powf(k)).collect();
                (trapezoid(&z, dt) - target).abs() / target
            })
            .collect();
        assert!(errs[2] < errs[0], "k={k}: {errs:?}");
        assert!(errs[2] < bound, "k={k}: {errs:?}, bound {bound}");
    }
}
