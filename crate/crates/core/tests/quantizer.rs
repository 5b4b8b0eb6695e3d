use proptest::prelude::*;
use qpl_core::quantizer::{design_step_size, unit_gaussian_distortion, QuantizerSpec};
use qpl_core::rng::rng_from_seed;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn closed_form_distortion_matches_monte_carlo() {
    let mut rng = rng_from_seed(42);
    let samples: Vec<f64> = (0..400_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    for levels in [2, 3, 4, 8, 16] {
        // a unit-σ real dimension is half of a variance-2 complex entry
        let spec = QuantizerSpec::designed(levels, 2.0).unwrap();
        let mc = samples
            .iter()
            .map(|&x| (x - spec.quantize_real(x)).powi(2))
            .sum::<f64>()
            / samples.len() as f64;
        let exact = unit_gaussian_distortion(levels, spec.step());
        assert!(
            (mc - exact).abs() / exact < 0.02,
            "L = {levels}: {mc} vs {exact}"
        );
    }
}

#[test]
fn designed_step_is_a_local_minimum() {
    for levels in [2, 4, 5, 8, 10] {
        let step = design_step_size(levels, 2.0).unwrap();
        let d = unit_gaussian_distortion(levels, step);
        for f in [0.99, 1.01] {
            assert!(
                unit_gaussian_distortion(levels, step * f) > d,
                "L = {levels}"
            );
        }
    }
}

#[test]
fn step_scales_with_standard_deviation() {
    let a = design_step_size(8, 1.0 / 64.0).unwrap();
    let b = design_step_size(8, 4.0 / 64.0).unwrap();
    assert!((b / a - 2.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn quantizing_picks_a_nearest_label(levels in 2usize..12, step in 0.01f64..3.0, x in -40.0f64..40.0) {
        let spec = QuantizerSpec::uniform(levels, step).unwrap();
        let y = spec.quantize_real(x);
        prop_assert!(spec.is_label(y));
        for &l in spec.labels() {
            prop_assert!((x - y).abs() <= (x - l).abs() + 1e-12);
        }
    }

    #[test]
    fn cells_are_half_open_between_thresholds(levels in 2usize..12, step in 0.01f64..3.0, x in -40.0f64..40.0) {
        let spec = QuantizerSpec::uniform(levels, step).unwrap();
        let z = spec.cell_index(x);
        let t = spec.thresholds();
        // inner thresholds only; the outer cells are unbounded
        if z > 0 {
            prop_assert!(x >= t[z - 1]);
        }
        if z + 1 < levels {
            prop_assert!(x < t[z]);
        }
        prop_assert_eq!(spec.labels()[z], spec.quantize_real(x));
    }

    #[test]
    fn labels_are_symmetric(levels in 2usize..16, step in 0.01f64..3.0) {
        let spec = QuantizerSpec::uniform(levels, step).unwrap();
        let l = spec.labels();
        for i in 0..levels {
            prop_assert!((l[i] + l[levels - 1 - i]).abs() < 1e-12);
        }
    }
}
