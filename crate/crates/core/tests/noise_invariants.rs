use donor_memory::experiment::with_workers;
use donor_memory::noise::{dephase, measure_electron_z, reported_probability, Coherence, NoiseConfig, ReadoutBasis};
use donor_memory::rng;
use donor_memory::spin::{basis, DensityMatrix4};
use num_complex::Complex64;
use proptest::prelude::*;
use rayon::prelude::*;

fn random_state() -> impl Strategy<Value = DensityMatrix4> {
    prop::array::uniform32(-1.0f64..1.0).prop_map(|v| {
        let a = nalgebra::Matrix4::from_fn(|r, c| Complex64::new(v[4 * r + c], v[16 + 4 * r + c]));
        let m = a * a.adjoint();
        let tr = m.trace();
        DensityMatrix4::new(m / tr).unwrap()
    })
}

fn coherence() -> impl Strategy<Value = Coherence> {
    prop_oneof![Just(Coherence::Electron), Just(Coherence::Nuclear), Just(Coherence::Double)]
}

proptest! {
    #[test]
    fn dephasing_keeps_any_state_physical(
        rho in random_state(),
        duration in 0.0f64..1e-2,
        t2 in 1e-6f64..1.0,
        alpha in 0.1f64..4.0,
        which in coherence(),
    ) {
        let out = dephase(&rho, duration, t2, alpha, which).unwrap();
        prop_assert!(DensityMatrix4::new(*out.matrix()).is_ok());
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_dephasing_composes(rho in random_state(), t1 in 0.0f64..2e-3, t2 in 0.0f64..2e-3, tc in 1e-4f64..1e-2, which in coherence()) {
        let twice = dephase(&dephase(&rho, t1, tc, 1.0, which).unwrap(), t2, tc, 1.0, which).unwrap();
        let once = dephase(&rho, t1 + t2, tc, 1.0, which).unwrap();
        prop_assert!((twice.matrix() - once.matrix()).norm() < 1e-12);
    }

    #[test]
    fn readout_gap_equals_visibility(v in 0.0f64..=1.0) {
        let up = DensityMatrix4::basis_state(basis::UP_UP).electron_up_probability();
        let down = DensityMatrix4::basis_state(basis::DOWN_UP).electron_up_probability();
        let gap = reported_probability(up, v) - reported_probability(down, v);
        prop_assert!((gap - v).abs() < 1e-15);
    }
}

fn draw_all(seed: u64) -> Vec<u64> {
    let noise = NoiseConfig::default();
    let rho = DensityMatrix4::maximally_mixed();
    (0..64u64)
        .into_par_iter()
        .map(|k| {
            let mut s = rng::stream(seed, &[rng::label("test"), k]);
            measure_electron_z(&rho, &noise, ReadoutBasis::Phase(15.0 * k as f64 % 360.0), k, &mut s).counts_up
        })
        .collect()
}

#[test]
fn shot_records_do_not_depend_on_pool_size() {
    let one = with_workers(Some(1), || draw_all(42)).unwrap();
    let eight = with_workers(Some(8), || draw_all(42)).unwrap();
    assert_eq!(one, eight);
    assert_eq!(one, draw_all(42));
    assert_ne!(one, draw_all(43));
}
