use fbmest::cache::ConstantsCache;
use fbmest::config::ModelConfig;
use fbmest::io::{read_fbm1, write_fbm1};
use fbmest::mc::{moments, power_curve, run_experiment, Experiment, Target, TestConfig};
use fbmest_core::{Kernel, Process};
use proptest::prelude::*;

fn known_h(replicates: usize) -> Experiment {
    Experiment {
        name: "se".into(),
        model: ModelConfig::named("m4", 1.0, 0.0, 1.0),
        kernel: "second_difference".into(),
        h: 0.7,
        eps: vec![2f64.powi(-6)],
        k: vec![2],
        scales: vec![1.0, 2.0],
        replicates,
        base_seed: 100,
        target: Target::KnownH,
        steps_per_eps: 8,
        checks: Vec::new(),
    }
}

#[test]
fn standard_errors_shrink_like_root_n() {
    let cache = ConstantsCache::in_memory();
    let big = run_experiment(&known_h(400), &cache).unwrap();
    let small = run_experiment(&known_h(100), &cache).unwrap();
    let eps = 2f64.powi(-6);
    let (a, b) = (big.cell(eps, 2, "sigma_tilde_err").unwrap(), small.cell(eps, 2, "sigma_tilde_err").unwrap());
    let ratio = b.std_error / a.std_error;
    assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
    // the first 100 replicates are shared
    assert_eq!(&big.sample(eps, 2, "sigma_tilde").unwrap()[..100], small.sample(eps, 2, "sigma_tilde").unwrap());
}

#[test]
fn power_curve_is_monotone_and_starts_at_the_size() {
    let cache = ConstantsCache::in_memory();
    let template = TestConfig {
        variant: "f_const".into(),
        sigma0: 1.0,
        d: 0.0,
        alpha: 0.05,
        f_shift: "identity".into(),
        mu_mode: "constant".into(),
        mu: 0.5,
        c: 1.0,
    };
    let curve =
        power_curve(&template, 0.7, Kernel::SecondDifference, &[0.0, 2.0, 5.0], 100, 2f64.powi(-7), 1, &cache).unwrap();
    assert!(curve.monotone, "{curve:?}");
    assert!(curve.points[0].rejection_rate < 0.15);
    assert!(curve.points[2].rejection_rate > 0.9);
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    assert!(power_curve(&template, 0.7, Kernel::SecondDifference, &[0.0], 99, 2f64.powi(-7), 1, &cache).is_err());
}

proptest! {
    #[test]
    fn moments_ignore_order(mut xs in proptest::collection::vec(-1e6f64..1e6, 2..60), seed in any::<u64>()) {
        let before = moments(&xs);
        let n = xs.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
            xs.swap(i, j);
        }
        prop_assert_eq!(before, moments(&xs));
    }

    #[test]
    fn fbm1_roundtrips(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..50),
                       h in 0.01f64..0.99, t0 in -1.0f64..0.0, dt in 1e-6f64..0.1) {
        let p = Process { t0, dt, values };
        let mut buf = Vec::new();
        write_fbm1(&mut buf, h, &p).unwrap();
        let back = read_fbm1(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.h, h);
        prop_assert_eq!(back.process, p);
    }
}
