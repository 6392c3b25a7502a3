use proptest::prelude::*;
use qmemsim_core::analytic::{decay_moments, ghz_ratio_closed_form, ratio_first_order};
use qmemsim_core::noise::dense::lindbladian_dense;
use qmemsim_core::states::{ghz_state, load_state_file, random_arbitrary_state, reorder_descending, save_state_file};
use qmemsim_core::{DensityMatrix, Lindbladian, NoiseModel};

fn models(n: u32) -> Vec<NoiseModel> {
    let dim = 1usize << n;
    vec![
        NoiseModel::qubit_register(n, 1.3, true),
        NoiseModel::qubit_register(n, 0.4, false),
        NoiseModel::single_qudit(dim, 0.8),
        NoiseModel::qudit_array(n, 2, 1.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reorder_keeps_magnitudes(n in 1u32..7, seed in any::<u64>()) {
        let psi = random_arbitrary_state(1 << n, seed).unwrap();
        let (sorted, perm) = reorder_descending(&psi);
        let mut before: Vec<f64> = psi.amplitudes().iter().map(|a| a.norm()).collect();
        before.sort_by(|a, b| b.total_cmp(a));
        let after: Vec<f64> = sorted.amplitudes().iter().map(|a| a.norm()).collect();
        prop_assert_eq!(&before, &after);
        for (k, &p) in perm.iter().enumerate() {
            prop_assert_eq!(sorted.amplitudes()[k], psi.amplitudes()[p]);
        }
    }

    #[test]
    fn generator_is_traceless_hermitian_and_matches_dense(n in 1u32..5, seed in any::<u64>()) {
        let rho = DensityMatrix::from_pure(&random_arbitrary_state(1 << n, seed).unwrap());
        for model in models(n) {
            let fast = Lindbladian::from_model(&model).unwrap().apply_to(&rho).unwrap();
            let slow = lindbladian_dense(&model.compile(), &rho).unwrap();
            prop_assert!(fast.trace().norm() < 1e-13);
            prop_assert!(fast.hermiticity_error() < 1e-13);
            prop_assert!(fast.max_abs_diff(&slow) < 1e-13);
        }
    }

    #[test]
    fn decay_moments_obey_jensen(n in 1u32..7, seed in any::<u64>()) {
        let psi = random_arbitrary_state(1 << n, seed).unwrap();
        for model in models(n) {
            let m = decay_moments(&psi, &model, 2).unwrap();
            prop_assert!(m[1] >= m[0] * m[0] * (1.0 - 1e-12));
        }
    }
}

#[test]
fn ghz_prediction_at_32768_levels() {
    for n in [13u32, 14, 15] {
        let psi = ghz_state(n).unwrap();
        let r = ratio_first_order(&psi, &NoiseModel::qubit_register(n, 1.0, true), &NoiseModel::single_qudit(1 << n, 1.0))
            .unwrap()
            .first_order;
        let exact = ghz_ratio_closed_form(n);
        assert!((r - exact).abs() <= 4.0 * f64::EPSILON * exact, "n = {n}: {r} vs {exact}");
    }
}

#[test]
fn state_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let psi = random_arbitrary_state(32, 4).unwrap();
    save_state_file(&psi, &path).unwrap();
    let back = load_state_file(&path).unwrap();
    assert_eq!(back.amplitudes(), psi.amplitudes());
}
