use donor_memory::fitting::{power_law_fit, stretched_exp_fit};
use proptest::prelude::*;

fn log_times(lo: f64, decades: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * 10f64.powf(decades * k as f64 / (n - 1) as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stretched_exp_recovers_its_own_model(
        t2 in 1e-3f64..1.0,
        alpha in 0.8f64..3.0,
        k in 0.2f64..0.5,
        y0 in 0.4f64..0.6,
    ) {
        let tau = log_times(0.1 * t2, 1.5, 16);
        let y: Vec<f64> = tau.iter().map(|t| y0 + k * (-(t / t2).powf(alpha)).exp()).collect();
        let f = stretched_exp_fit(&tau, &y, &vec![1e-3; tau.len()]).unwrap();
        prop_assert!(f.converged);
        prop_assert!(((f.t2 - t2) / t2).abs() < 1e-8, "t2 {} vs {}", f.t2, t2);
        prop_assert!(((f.alpha - alpha) / alpha).abs() < 1e-8, "alpha {} vs {}", f.alpha, alpha);
        prop_assert!(((f.k - k) / k).abs() < 1e-8);
        prop_assert!(((f.y0 - y0) / y0).abs() < 1e-8);
    }

    #[test]
    fn stretched_exp_ignores_point_order(seed in 0u64..1000, rot in 1usize..15) {
        let tau = log_times(5e-3, 1.5, 16);
        let jitter: Vec<f64> = (0..16).map(|k| 0.004 * (((seed + k) as f64) * 12.9898).sin()).collect();
        let y: Vec<f64> = tau.iter().zip(&jitter).map(|(t, j)| 0.5 + 0.4 * (-(t / 0.08f64).powi(2)).exp() + j).collect();
        let e = vec![0.005; 16];
        let a = stretched_exp_fit(&tau, &y, &e).unwrap();
        let (mut tr, mut yr) = (tau.clone(), y.clone());
        tr.rotate_left(rot);
        yr.rotate_left(rot);
        let b = stretched_exp_fit(&tr, &yr, &e).unwrap();
        prop_assert!(((a.t2 - b.t2) / a.t2).abs() < 1e-8);
        prop_assert!((a.alpha - b.alpha).abs() < 1e-8);
    }

    #[test]
    fn power_law_is_exact_on_exact_data(c in 1e-3f64..1.0, e in -1.0f64..1.0) {
        let n = [1.0f64, 2.0, 4.0, 16.0, 64.0, 256.0];
        let t: Vec<f64> = n.iter().map(|n| c * n.powf(e)).collect();
        let f = power_law_fit(&n, &t, &[0.0; 6]).unwrap();
        prop_assert!((f.exponent - e).abs() < 1e-10);
        prop_assert!(((f.prefactor - c) / c).abs() < 1e-10);
    }
}
