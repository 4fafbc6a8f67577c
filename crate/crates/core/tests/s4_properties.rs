//! Noise correction of S4 and the intensity-based S4 estimate.

use proptest::prelude::*;
use scint_core::preprocess::{compute_s4_total, correct_s4, IntensitySeries};

fn oracle(total: f64, noise: f64) -> f64 {
    if noise >= total {
        0.0
    } else {
        ((total - noise) * (total + noise)).sqrt()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn corrected_value_is_bounded(total in 0.0f64..2.0, noise in 0.0f64..2.0) {
        let c = correct_s4(total, noise);
        prop_assert!(c >= 0.0 && c <= total);
        prop_assert!((c - oracle(total, noise)).abs() <= 1e-12);
    }

    #[test]
    fn noise_at_or_above_total_gives_zero(total in 0.0f64..2.0, extra in 0.0f64..1.0) {
        prop_assert_eq!(correct_s4(total, total + extra), 0.0);
        prop_assert_eq!(correct_s4(total, total), 0.0);
    }

    #[test]
    fn correction_shrinks_with_more_noise(total in 0.0f64..2.0, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(correct_s4(total, hi) <= correct_s4(total, lo));
    }

    #[test]
    fn zero_noise_is_identity(total in 0.0f64..2.0) {
        prop_assert_eq!(correct_s4(total, 0.0), total);
    }

    #[test]
    fn s4_total_is_scale_invariant(
        samples in prop::collection::vec(0.5f64..2.0, 10..200),
        scale in 0.1f64..100.0,
    ) {
        let a = compute_s4_total(&IntensitySeries::new(samples.clone(), 1e12).unwrap());
        let scaled: Vec<f64> = samples.iter().map(|v| v * scale).collect();
        let b = compute_s4_total(&IntensitySeries::new(scaled, 1e12).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

#[test]
fn s4_total_matches_two_pass_formula() {
    let samples: Vec<f64> = (0..120).map(|i| 1.0 + 0.3 * ((i as f64) * 0.7).sin()).collect();
    let snr = 5_000.0;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let noise = (100.0 / snr) * (1.0 + 500.0 / (19.0 * snr));
    let want = (var / (mean * mean) - noise).sqrt();
    let got = compute_s4_total(&IntensitySeries::new(samples, snr).unwrap());
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}
