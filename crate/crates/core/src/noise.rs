//! Time-domain noise with a prescribed power spectrum
//! `PSD(f) = rho / f^alpha + sigma2`.
//!
//! Each positive-frequency bin gets amplitude `sqrt(c * PSD(f))` times an
//! independent unit-variance complex Gaussian; the negative half mirrors it
//! so the inverse FFT is real. DC is zero. With `c = N^2 / (N - 1)` the
//! expected sample variance equals the mean of the PSD over the non-DC bins,
//! so a white spectrum (`rho = 0`) yields variance `sigma2`.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rho: f64,
    pub alpha: f64,
    /// White-noise power (variance).
    pub sigma2: f64,
    pub n_samples: usize,
    /// Hz.
    pub fs: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.alpha >= 0.0 && self.sigma2 >= 0.0) {
            return Err(Error::invalid("noise", "rho, alpha and sigma2 must be >= 0"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples", "must be >= 2"));
        }
        if !(self.fs > 0.0) {
            return Err(Error::invalid("fs", "must be > 0"));
        }
        Ok(())
    }

    /// Analytic PSD at frequency `f` (Hz); zero at DC.
    pub fn psd(&self, f: f64) -> f64 {
        if f == 0.0 {
            return 0.0;
        }
        let power_law = if self.rho == 0.0 {
            0.0
        } else {
            self.rho / f.abs().powf(self.alpha)
        };
        power_law + self.sigma2
    }

    /// Frequencies of the one-sided bins `0..=N/2`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..=self.n_samples / 2)
            .map(|k| k as f64 * self.fs / self.n_samples as f64)
            .collect()
    }

    fn bin_gain(&self) -> f64 {
        let n = self.n_samples as f64;
        n * n / (n - 1.0)
    }
}

/// Draws one noise realization.
pub fn generate_noise(spec: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.n_samples;
    if spec.rho == 0.0 && spec.sigma2 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = seed::rng(seed);
    let gain = spec.bin_gain();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=n / 2 {
        let f = k as f64 * spec.fs / n as f64;
        let amp = (gain * spec.psd(f)).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if 2 * k == n {
            spectrum[k] = Complex64::new(amp * re, 0.0);
        } else {
            let z = Complex64::new(amp * re * half, amp * im * half);
            spectrum[k] = z;
            spectrum[n - k] = z.conj();
        }
    }
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    ifft.process(&mut spectrum);
    let scale = 1.0 / n as f64;
    Ok(spectrum.iter().map(|z| z.re * scale).collect())
}

/// One-sided periodogram of `x` in the generator's PSD convention, so its
/// expectation equals [`NoiseSpec::psd`] on bins `0..=N/2`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n / 2 + 1];
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = (n as f64 - 1.0) / (n as f64 * n as f64);
    buf[..=n / 2].iter().map(|z| z.norm_sqr() * norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rho: f64, alpha: f64, sigma2: f64, n: usize) -> NoiseSpec {
        NoiseSpec {
            rho,
            alpha,
            sigma2,
            n_samples: n,
            fs: 250.0,
        }
    }

    #[test]
    fn zero_psd_is_silent() {
        assert!(generate_noise(&spec(0.0, 1.0, 0.0, 1000), 3)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn white_variance_matches_sigma2() {
        let s2 = 0.04;
        let x = generate_noise(&spec(0.0, 0.0, s2, 1 << 18), 11).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - s2).abs() / s2 < 0.05, "var {var}");
    }

    #[test]
    fn output_is_real_with_small_mean() {
        let x = generate_noise(&spec(1e-3, 1.0, 1e-4, 4096), 5).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        // DC is zero, so the mean is exactly zero up to rounding.
        assert!(mean.abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(1e-3, 1.2, 1e-5, 777);
        assert_eq!(generate_noise(&s, 9).unwrap(), generate_noise(&s, 9).unwrap());
        assert_ne!(generate_noise(&s, 9).unwrap(), generate_noise(&s, 10).unwrap());
    }

    #[test]
    fn odd_lengths_supported() {
        let x = generate_noise(&spec(0.0, 0.0, 1.0, 1001), 1).unwrap();
        assert_eq!(x.len(), 1001);
    }

    #[test]
    fn rejects_invalid_spec() {
        assert!(generate_noise(&spec(-1.0, 0.0, 0.0, 10), 0).is_err());
        assert!(generate_noise(&spec(0.0, 0.0, 1.0, 1), 0).is_err());
    }

    #[test]
    fn periodogram_inverts_generator_scaling() {
        // A white spectrum averaged over seeds should come back flat at sigma2.
        let s = spec(0.0, 0.0, 2.0, 512);
        let mut acc = vec![0.0; 257];
        for seed in 0..400 {
            let p = periodogram(&generate_noise(&s, seed).unwrap());
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v / 400.0;
            }
        }
        let mean = acc[1..].iter().sum::<f64>() / 256.0;
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }
}
