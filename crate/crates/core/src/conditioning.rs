//! Label vectors, band-pass filtering and amplitude normalization, shared by
//! training-example generation and inference.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the label pulse around each r apex (five ones in total).
pub const LABEL_HALF_WIDTH: usize = 2;
pub const LOW_CORNER_HZ: f64 = 0.5;
pub const HIGH_CORNER_HZ: f64 = 50.0;

/// Binary labels with ones at `i-2..=i+2` for every r index, clipped to the
/// record.
pub fn make_labels(r_indices: &[usize], length: usize) -> Result<Vec<u8>> {
    if r_indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotIncreasing);
    }
    let mut labels = vec![0u8; length];
    for &r in r_indices {
        if r >= length {
            return Err(Error::IndexOutOfRange { index: r, length });
        }
        let lo = r.saturating_sub(LABEL_HALF_WIDTH);
        let hi = (r + LABEL_HALF_WIDTH).min(length - 1);
        labels[lo..=hi].fill(1);
    }
    Ok(labels)
}

/// Second-order IIR section, `a0` normalized to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Second-order Butterworth band-pass (first-order prototype) with
    /// prewarped corners, via the bilinear transform.
    pub fn butterworth_bandpass(low_hz: f64, high_hz: f64, fs: f64) -> Result<Self> {
        if !(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0) {
            return Err(Error::invalid(
                "bandpass",
                format!("need 0 < {low_hz} < {high_hz} < fs/2 = {}", fs / 2.0),
            ));
        }
        let k = 2.0 * fs;
        let w1 = k * (PI * low_hz / fs).tan();
        let w2 = k * (PI * high_hz / fs).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;
        // H(s) = bw s / (s^2 + bw s + w0^2), s = k (1 - z^-1) / (1 + z^-1)
        let a0 = k * k + bw * k + w0sq;
        let b = [bw * k / a0, 0.0, -bw * k / a0];
        let a = [1.0, (2.0 * w0sq - 2.0 * k * k) / a0, (k * k - bw * k + w0sq) / a0];
        Ok(Biquad { b, a })
    }

    /// Complex response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Filters from a zero initial state (transposed direct form II).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = b0 * v + s1;
                s1 = b1 * v - a1 * y + s2;
                s2 = b2 * v - a2 * y;
                y
            })
            .collect()
    }

    /// Forward then backward pass; zero phase, squared magnitude.
    pub fn filter_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y
    }
}

/// The 0.5–50 Hz band-pass, applied once in the forward direction.
pub fn bandpass(signal: &[f64], fs: f64) -> Result<Vec<f64>> {
    Ok(design(fs)?.filter(signal))
}

/// Forward-backward variant of [`bandpass`].
pub fn bandpass_zero_phase(signal: &[f64], fs: f64) -> Result<Vec<f64>> {
    Ok(design(fs)?.filter_zero_phase(signal))
}

fn design(fs: f64) -> Result<Biquad> {
    if !(fs > 2.0 * HIGH_CORNER_HZ) {
        return Err(Error::invalid("fs", format!("must exceed 100 Hz, got {fs}")));
    }
    Biquad::butterworth_bandpass(LOW_CORNER_HZ, HIGH_CORNER_HZ, fs)
}

/// Result of min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub samples: Vec<f64>,
    /// The input was constant (or empty); `samples` are all zero.
    pub degenerate: bool,
}

/// Affine map sending the minimum to -1 and the maximum to +1.
pub fn normalize(signal: &[f64]) -> Normalized {
    let (lo, hi) = signal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if signal.is_empty() || !(hi > lo) || !(hi - lo).is_finite() {
        return Normalized {
            samples: vec![0.0; signal.len()],
            degenerate: true,
        };
    }
    if lo == -1.0 && hi == 1.0 {
        return Normalized {
            samples: signal.to_vec(),
            degenerate: false,
        };
    }
    let scale = 2.0 / (hi - lo);
    Normalized {
        samples: signal
            .iter()
            .map(|&v| ((v - lo) * scale - 1.0).clamp(-1.0, 1.0))
            .collect(),
        degenerate: false,
    }
}

/// Moves each index to the signal maximum within `[i - w/2, i + w/2)`.
/// Used to align annotations of real recordings before scoring.
pub fn snap_to_max(indices: &[usize], signal: &[f64], window: usize) -> Vec<usize> {
    let half = window / 2;
    let mut out: Vec<usize> = indices
        .iter()
        .filter(|&&i| i < signal.len())
        .map(|&i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(signal.len());
            (lo..hi).fold(lo, |best, j| if signal[j] > signal[best] { j } else { best })
        })
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn labels_centered_on_r() {
        let l = make_labels(&[100], 1000).unwrap();
        let ones: Vec<usize> = (0..1000).filter(|&i| l[i] == 1).collect();
        assert_eq!(ones, vec![98, 99, 100, 101, 102]);
    }

    #[test]
    fn labels_clip_at_edges() {
        let l = make_labels(&[1, 999], 1000).unwrap();
        let ones: Vec<usize> = (0..1000).filter(|&i| l[i] == 1).collect();
        assert_eq!(ones, vec![0, 1, 2, 3, 997, 998, 999]);
        assert!(make_labels(&[], 1000).unwrap().iter().all(|&v| v == 0));
    }

    #[test]
    fn labels_reject_bad_indices() {
        assert!(matches!(make_labels(&[1000], 1000), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(make_labels(&[5, 5], 1000), Err(Error::NotIncreasing)));
    }

    #[test]
    fn corner_and_passband_gains() {
        let f = Biquad::butterworth_bandpass(0.5, 50.0, 250.0).unwrap();
        assert_abs_diff_eq!(db(f.response(0.5, 250.0).norm()), -3.0103, epsilon = 1e-6);
        assert_abs_diff_eq!(db(f.response(50.0, 250.0).norm()), -3.0103, epsilon = 1e-6);
        assert!(db(f.response(5.0, 250.0).norm()).abs() < 0.5);
        assert!(db(f.response(60.0, 250.0).norm()) < -3.0);
    }

    #[test]
    fn dc_is_removed() {
        let y = bandpass(&vec![1.0; 5000], 250.0).unwrap();
        assert!(y[4999].abs() < 1e-3);
    }

    #[test]
    fn five_hz_amplitude_kept() {
        let fs = 250.0;
        let x: Vec<f64> = (0..5000).map(|n| (2.0 * PI * 5.0 * n as f64 / fs).sin()).collect();
        let y = bandpass(&x, fs).unwrap();
        let peak = y[2500..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Analytic gain at 5 Hz.
        let g = Biquad::butterworth_bandpass(0.5, 50.0, fs)
            .unwrap()
            .response(5.0, fs)
            .norm();
        assert!((peak - 1.0).abs() < 0.06);
        assert_abs_diff_eq!(peak, g, epsilon = 2e-3);
    }

    #[test]
    fn low_rates_rejected() {
        assert!(bandpass(&[0.0; 10], 100.0).is_err());
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let fs = 250.0;
        let x: Vec<f64> = (0..4000).map(|n| (2.0 * PI * 3.0 * n as f64 / fs).sin()).collect();
        let y = bandpass_zero_phase(&x, fs).unwrap();
        // Compare in the middle, away from edge transients.
        for n in 1500..2500 {
            let g = Biquad::butterworth_bandpass(0.5, 50.0, fs)
                .unwrap()
                .response(3.0, fs)
                .norm_sqr();
            assert_abs_diff_eq!(y[n], g * x[n], epsilon = 5e-3);
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[0.0, 5.0, 10.0]).samples, vec![-1.0, 0.0, 1.0]);
        let x = [-1.0, 0.3, 1.0, -0.2];
        assert_eq!(normalize(&x).samples, x.to_vec());
        let c = normalize(&[2.0; 7]);
        assert!(c.degenerate);
        assert_eq!(c.samples, vec![0.0; 7]);
    }

    #[test]
    fn snap_moves_to_local_max() {
        let mut s = vec![0.0; 100];
        s[50] = 3.0;
        assert_eq!(snap_to_max(&[44, 55], &s, 16), vec![50]);
        assert_eq!(snap_to_max(&[10], &s, 16), vec![2]);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(x in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let once = normalize(&x);
            prop_assume!(!once.degenerate);
            let twice = normalize(&once.samples);
            for (a, b) in once.samples.iter().zip(&twice.samples) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn label_count(mut idx in proptest::collection::btree_set(0usize..1000, 0..40)) {
            // Keep r-waves at least five apart so pulses never overlap.
            let mut kept: Vec<usize> = Vec::new();
            for i in std::mem::take(&mut idx) {
                if kept.last().is_none_or(|&l| i >= l + 5) {
                    kept.push(i);
                }
            }
            let l = make_labels(&kept, 1000).unwrap();
            let expected: usize = kept.iter().map(|&r| r.min(2) + 1 + (999 - r).min(2)).sum();
            prop_assert_eq!(l.iter().map(|&v| v as usize).sum::<usize>(), expected);
        }
    }
}
