//! Property tests over randomized configurations.

use cernn_core::complex::ComplexVector;
use cernn_core::linops::{
    apply_fourier, truncate, truncate_adjoint, Cascade, FftDirection,
};
use cernn_core::rng::Rng;
use cernn_core::tasks::{
    gen_copy_batch, memoryless_baseline_ce, CopyTaskSpec, FILLER, TRIGGER,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn fft_round_trip_any_length(n in 1usize..40, seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let x = ComplexVector::random(n, &mut rng);
        let y = apply_fourier(&x, FftDirection::Forward).unwrap();
        let back = apply_fourier(&y, FftDirection::Inverse).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-12);
        prop_assert!((y.norm() - x.norm()).abs() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn truncation_adjoint_identity(n in 1usize..32, seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let k = 1 + rng.below(n);
        let x = ComplexVector::random(n, &mut rng);
        let g = ComplexVector::random(k, &mut rng);
        let lhs = truncate(&x, k).unwrap().dot_conj(&g);
        let rhs = x.dot_conj(&truncate_adjoint(&g, n).unwrap());
        prop_assert!((lhs.0 - rhs.0).abs() < 1e-12);
        prop_assert!((lhs.1 - rhs.1).abs() < 1e-12);
    }

    #[test]
    fn unitary_cascade_norm_preserving(seed in 0u64..500) {
        let mut rng = Rng::new(seed);
        let n = [4usize, 8, 16, 32][rng.below(4)];
        let c = Cascade::new_unitary(n, &mut rng);
        let x = ComplexVector::random(n, &mut rng);
        let y = c.apply(&x).unwrap();
        prop_assert!((y.norm() - x.norm()).abs() / x.norm() < 1e-10);
    }

    #[test]
    fn superset_pinning_is_exact(seed in 0u64..500) {
        let mut rng = Rng::new(seed);
        let u = Cascade::new_unitary(8, &mut rng);
        let ce = u.to_complex_evolution();
        let x = ComplexVector::random(8, &mut rng);
        prop_assert!(u.apply(&x).unwrap().max_abs_diff(&ce.apply(&x).unwrap()) < 1e-13);
    }

    #[test]
    fn copy_samples_structurally_valid(t_len in 0usize..12, n_fill in 0usize..40, seed in 0u64..1000) {
        let spec = CopyTaskSpec::new(t_len, n_fill, seed);
        let mut rng = Rng::stream(seed, 2);
        let batch = gen_copy_batch(&spec, 3, &mut rng);
        for sample in &batch.samples {
            prop_assert_eq!(sample.inputs.len(), spec.total_len());
            prop_assert_eq!(sample.targets.len(), spec.total_len());
            let triggers: Vec<usize> = sample
                .inputs
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == TRIGGER)
                .map(|(i, _)| i)
                .collect();
            prop_assert_eq!(triggers, vec![spec.trigger_pos()]);
            for t in 0..t_len + n_fill + 1 {
                prop_assert!(sample.targets[t] == FILLER);
            }
            for j in 0..t_len {
                prop_assert_eq!(sample.targets[t_len + n_fill + 1 + j], sample.inputs[j]);
            }
            // One-hot rows: exactly one nonzero, summing to one.
            for row in sample.one_hot_inputs() {
                prop_assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 1);
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn baseline_monotone_in_filler_length(t_len in 1usize..12, n_fill in 0usize..200) {
        let a = memoryless_baseline_ce(&CopyTaskSpec::new(t_len, n_fill, 0));
        let b = memoryless_baseline_ce(&CopyTaskSpec::new(t_len, n_fill + 1, 0));
        prop_assert!(b < a);
    }
}
