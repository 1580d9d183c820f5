//! Beat-interval sequences with breathing modulation.
//!
//! `rr_i = mu + beta * sin(2 pi f_b t_i) + gamma`, where `t_i` is the sum of
//! the previously emitted intervals and `gamma` is white Gaussian.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Default lower bound on a single interval, seconds.
pub const RR_FLOOR: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    /// Seconds per beat.
    pub intervals: Vec<f64>,
    /// Beat onset times, seconds; `times[0] == 0`.
    pub times: Vec<f64>,
    /// Set when at least one interval was raised to the floor.
    pub clamped: bool,
}

impl RrSeries {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.intervals.iter().sum::<f64>() / self.intervals.len() as f64
    }

    /// Total duration covered by the intervals, seconds.
    pub fn duration(&self) -> f64 {
        self.intervals.iter().sum()
    }
}

/// RR generator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrModel {
    pub mu: f64,
    pub beta: f64,
    pub f_b: f64,
    pub gamma_sd: f64,
    /// Intervals below this are clamped to it; `None` disables clamping.
    pub floor: Option<f64>,
}

impl RrModel {
    pub fn new(mu: f64, beta: f64, f_b: f64, gamma_sd: f64) -> Self {
        RrModel {
            mu,
            beta,
            f_b,
            gamma_sd,
            floor: Some(RR_FLOOR),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu", "must be > 0"));
        }
        if !(self.gamma_sd >= 0.0) || !self.gamma_sd.is_finite() {
            return Err(Error::invalid("gamma_sd", "must be >= 0"));
        }
        if !self.beta.is_finite() || !self.f_b.is_finite() {
            return Err(Error::invalid("beta/f_b", "must be finite"));
        }
        if !(self.mu - self.beta.abs() - 5.0 * self.gamma_sd > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!(
                    "no positivity headroom: mu - |beta| - 5 gamma_sd = {}",
                    self.mu - self.beta.abs() - 5.0 * self.gamma_sd
                ),
            ));
        }
        Ok(())
    }

    pub fn generate(&self, n_beats: usize, seed: u64) -> Result<RrSeries> {
        self.validate()?;
        if n_beats == 0 {
            return Err(Error::invalid("n_beats", "must be >= 1"));
        }
        let mut rng = seed::rng(seed);
        let gamma = Normal::new(0.0, self.gamma_sd).map_err(|e| Error::invalid("gamma_sd", e.to_string()))?;
        let mut intervals = Vec::with_capacity(n_beats);
        let mut times = Vec::with_capacity(n_beats);
        let mut t = 0.0;
        let mut clamped = false;
        for _ in 0..n_beats {
            let noise = if self.gamma_sd > 0.0 {
                gamma.sample(&mut rng)
            } else {
                0.0
            };
            let mut rr = self.mu + self.beta * (2.0 * std::f64::consts::PI * self.f_b * t).sin() + noise;
            if let Some(floor) = self.floor {
                if rr < floor {
                    rr = floor;
                    clamped = true;
                }
            }
            times.push(t);
            intervals.push(rr);
            t += rr;
        }
        if clamped {
            log::warn!(
                "RR interval clamped to {:?} s (mu={}, beta={})",
                self.floor,
                self.mu,
                self.beta
            );
        }
        Ok(RrSeries {
            intervals,
            times,
            clamped,
        })
    }

    /// Generates beats until their total duration reaches `seconds`.
    pub fn generate_duration(&self, seconds: f64, seed: u64) -> Result<RrSeries> {
        self.validate()?;
        let shortest = self
            .floor
            .unwrap_or(0.0)
            .max(self.mu - self.beta.abs() - 5.0 * self.gamma_sd);
        let n = ((seconds / shortest).ceil() as usize).max(1) + 1;
        let mut series = self.generate(n, seed)?;
        // Keep just enough beats to cover the requested span.
        let mut total = 0.0;
        let mut keep = series.len();
        for (i, rr) in series.intervals.iter().enumerate() {
            total += rr;
            if total >= seconds {
                keep = i + 1;
                break;
            }
        }
        series.intervals.truncate(keep);
        series.times.truncate(keep);
        Ok(series)
    }
}

/// Convenience wrapper with the default interval floor.
pub fn generate_rr(mu: f64, beta: f64, f_b: f64, gamma_sd: f64, n_beats: usize, seed: u64) -> Result<RrSeries> {
    RrModel::new(mu, beta, f_b, gamma_sd).generate(n_beats, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn first_interval_has_no_modulation() {
        let s = generate_rr(1.0, 0.1, 0.28, 0.0, 1, 0).unwrap();
        assert_eq!(s.intervals, vec![1.0]);
        assert_eq!(s.times, vec![0.0]);
    }

    #[test]
    fn second_interval_hand_value() {
        let s = generate_rr(1.0, 0.1, 0.28, 0.0, 2, 0).unwrap();
        let expected = 1.0 + 0.1 * (2.0 * std::f64::consts::PI * 0.28).sin();
        assert_abs_diff_eq!(s.intervals[1], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(s.intervals[1], 1.0982, epsilon = 1e-4);
    }

    #[test]
    fn constant_rate_without_modulation() {
        let s = generate_rr(0.8, 0.0, 0.28, 0.0, 50, 3).unwrap();
        assert!(s.intervals.iter().all(|&rr| rr == 0.8));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(generate_rr(0.0, 0.0, 0.28, 0.0, 5, 0).is_err());
        assert!(generate_rr(1.0, 0.1, 0.28, 0.0, 0, 0).is_err());
        assert!(generate_rr(1.0, 0.1, 0.28, -0.1, 5, 0).is_err());
        assert!(generate_rr(0.3, 0.2, 0.28, 0.05, 5, 0).is_err());
    }

    #[test]
    fn floor_clamps_and_flags() {
        let mut model = RrModel::new(1.0, 0.1, 0.28, 0.0);
        model.floor = Some(0.95);
        let s = model.generate(40, 1).unwrap();
        assert!(s.clamped);
        assert!(s.intervals.iter().all(|&rr| rr >= 0.95));
        assert!(s.intervals.contains(&0.95));
        // Running sums use the clamped values.
        assert_abs_diff_eq!(s.times[5], s.intervals[..5].iter().sum::<f64>(), epsilon = 1e-12);

        let s = generate_rr(1.0, 0.1, 0.28, 0.0, 40, 1).unwrap();
        assert!(!s.clamped);
    }

    #[test]
    fn times_are_running_sums() {
        let s = generate_rr(0.9, 0.1, 0.28, 0.01, 100, 9).unwrap();
        assert_eq!(s.times[0], 0.0);
        let mut t = 0.0;
        for i in 0..s.len() {
            assert_abs_diff_eq!(s.times[i], t, epsilon = 1e-12);
            t += s.intervals[i];
        }
        assert!(s.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn duration_cover() {
        let model = RrModel::new(0.8, 0.1, 0.28, 0.0);
        let s = model.generate_duration(6.0, 0).unwrap();
        assert!(s.duration() >= 6.0);
        assert!(s.duration() - s.intervals.last().unwrap() < 6.0);
    }

    proptest! {
        #[test]
        fn deviation_bounded(mu in 0.5f64..1.5, beta in 0.0f64..0.2, gsd in 0.0f64..0.02, seed in any::<u64>()) {
            let mut model = RrModel::new(mu, beta, 0.28, gsd);
            model.floor = None;
            let s = model.generate(200, seed).unwrap();
            // 5 sd bound; exceeded with probability ~6e-7 per beat.
            for rr in &s.intervals {
                prop_assert!((rr - mu).abs() <= beta + 5.0 * gsd + 1e-12);
            }
        }
    }
}
