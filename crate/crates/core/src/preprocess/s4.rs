//! Amplitude scintillation index computation and noise correction.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntensityError {
    #[error("intensity series is empty")]
    Empty,
    #[error("intensity sample {index} is {value}, must be finite and positive")]
    BadSample { index: usize, value: f64 },
    #[error("SNR {0} must be positive")]
    BadSnr(f64),
}

/// One minute of detrended signal intensity samples (nominally 50 Hz) and
/// the linear SNR of the tracked signal. `snr = f64::INFINITY` disables the
/// thermal-noise term.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    samples: Vec<f64>,
    snr: f64,
}

impl IntensitySeries {
    pub fn new(samples: Vec<f64>, snr: f64) -> Result<Self, IntensityError> {
        if samples.is_empty() {
            return Err(IntensityError::Empty);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(IntensityError::BadSample { index, value });
        }
        if snr.is_nan() || snr <= 0.0 {
            return Err(IntensityError::BadSnr(snr));
        }
        Ok(Self { samples, snr })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }
}

/// Total S4: `sqrt((<SI^2> - <SI>^2) / <SI>^2 - (100/SNR)(1 + 500/(19 SNR)))`,
/// with a negative radicand clamped to zero.
pub fn compute_s4_total(series: &IntensitySeries) -> f64 {
    let n = series.samples.len() as f64;
    // Moments are taken about the first sample so a constant series has
    // exactly zero variance.
    let shift = series.samples[0];
    let mean_dev = series.samples.iter().map(|v| v - shift).sum::<f64>() / n;
    let variance = (series
        .samples
        .iter()
        .map(|v| (v - shift) * (v - shift))
        .sum::<f64>()
        / n
        - mean_dev * mean_dev)
        .max(0.0);
    let mean = shift + mean_dev;
    let snr = series.snr;
    let noise = (100.0 / snr) * (1.0 + 500.0 / (19.0 * snr));
    let radicand = variance / (mean * mean) - noise;
    if radicand > 0.0 {
        radicand.sqrt()
    } else {
        0.0
    }
}

/// Removes the receiver noise contribution: `sqrt(total^2 - noise^2)` when
/// the difference is positive, otherwise 0.
pub fn correct_s4(s4_total: f64, s4_noise: f64) -> f64 {
    let x = s4_total * s4_total - s4_noise * s4_noise;
    if x > 0.0 {
        x.sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_intensity_has_zero_s4() {
        let s = IntensitySeries::new(vec![4.2; 3000], f64::INFINITY).unwrap();
        assert_eq!(compute_s4_total(&s), 0.0);
    }

    #[test]
    fn alternating_intensity() {
        let samples: Vec<f64> = (0..3000).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
        let s = IntensitySeries::new(samples, f64::INFINITY).unwrap();
        assert_eq!(compute_s4_total(&s), 0.5);
    }

    #[test]
    fn noise_term_larger_than_variance_clamps() {
        let samples: Vec<f64> = (0..100).map(|i| 1.0 + 0.01 * f64::from(i % 2)).collect();
        // SNR of 10 gives a noise term of 10 * (1 + 500/190), far above the
        // normalized variance.
        let s = IntensitySeries::new(samples, 10.0).unwrap();
        assert_eq!(compute_s4_total(&s), 0.0);
    }

    #[test]
    fn noise_term_reduces_s4() {
        let samples: Vec<f64> = (0..3000).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
        let snr = 10_000.0;
        let s = IntensitySeries::new(samples, snr).unwrap();
        let noise = (100.0 / snr) * (1.0 + 500.0 / (19.0 * snr));
        assert!((compute_s4_total(&s) - (0.25f64 - noise).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn series_validation() {
        assert_eq!(IntensitySeries::new(vec![], 1.0), Err(IntensityError::Empty));
        assert!(matches!(
            IntensitySeries::new(vec![1.0, 0.0], 1.0),
            Err(IntensityError::BadSample { index: 1, .. })
        ));
        assert!(matches!(
            IntensitySeries::new(vec![1.0], 0.0),
            Err(IntensityError::BadSnr(_))
        ));
    }

    #[test]
    fn correction_examples() {
        assert!((correct_s4(0.3, 0.1) - 0.08f64.sqrt()).abs() < 1e-15);
        assert!((correct_s4(0.3, 0.1) - 0.282_842_712_474_619).abs() < 1e-12);
        assert_eq!(correct_s4(0.2, 0.2), 0.0);
        assert_eq!(correct_s4(0.1, 0.2), 0.0);
        assert_eq!(correct_s4(0.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn correction_is_bounded(total in 0.0f64..3.0, noise in 0.0f64..3.0) {
            let c = correct_s4(total, noise);
            prop_assert!(c >= 0.0 && c <= total);
            if noise >= total {
                prop_assert_eq!(c, 0.0);
            }
        }
    }
}
