//! Clean ECG synthesis from per-wave Gaussian-derivative gradients.
//!
//! Each wave `w` gets its own phase signal: the r-wave phase of the beat,
//! shifted by the wave's delay. The gradient of a wave is
//!
//! ```text
//! dz/dφ·2π = -2π m a φ / b² · exp(-m φ² / (2 b²))
//! ```
//!
//! with `m` chosen by the sign of `φ`. The five gradients are summed and
//! integrated cumulatively with the per-sample phase step `1 / N_i`, where
//! `N_i = round(rr_i f_s)`, so an isolated wave rises to its amplitude `a`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::{ParameterDraw, Wave};
use crate::rr::RrSeries;

/// Gradient of one wave at phase `phi`.
#[inline]
pub fn gradient_at(phi: f64, a: f64, b: f64, m_pos: f64, m_neg: f64) -> f64 {
    let m = if phi < 0.0 { m_neg } else { m_pos };
    let b2 = b * b;
    -2.0 * PI * m * a * phi / b2 * (-m * phi * phi / (2.0 * b2)).exp()
}

/// Evaluates the wave gradient on every sample of a phase signal.
pub fn wave_gradient(phase: &PhaseSignal, a: f64, b: f64, m_pos: f64, m_neg: f64) -> Vec<f64> {
    phase
        .samples
        .iter()
        .map(|&phi| gradient_at(phi, a, b, m_pos, m_neg))
        .collect()
}

/// Wraps a phase into `[-π, π)`.
#[inline]
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut p = (phi + PI).rem_euclid(two_pi) - PI;
    if p >= PI {
        p -= two_pi;
    }
    p
}

/// Sample layout of the beats: one window of samples per beat, with the r
/// wave at phase zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    /// Sample index of each r apex.
    pub r_indices: Vec<usize>,
    /// First sample owned by each beat.
    pub starts: Vec<usize>,
    /// One past the last sample owned by each beat.
    pub ends: Vec<usize>,
    /// Samples per phase cycle, `round(rr_i f_s)`.
    pub cycle_len: Vec<usize>,
}

impl BeatGrid {
    pub fn new(rr: &RrSeries, fs: f64) -> Result<Self> {
        if rr.is_empty() {
            return Err(Error::invalid("rr", "at least one beat is required"));
        }
        if !(fs > 0.0) {
            return Err(Error::invalid("sampling_rate", "must be > 0"));
        }
        let cycle_len: Vec<usize> = rr
            .intervals
            .iter()
            .map(|&x| ((x * fs).round() as usize).max(2))
            .collect();
        let lead = cycle_len[0] / 2;
        let mut r_indices: Vec<usize> = rr.times.iter().map(|&t| lead + (t * fs).round() as usize).collect();
        // Rounding never reorders beats, but guard against equal indices when
        // intervals are shorter than a sample.
        for i in 1..r_indices.len() {
            if r_indices[i] <= r_indices[i - 1] {
                r_indices[i] = r_indices[i - 1] + 1;
            }
        }
        let n = r_indices.len();
        let mut starts = Vec::with_capacity(n);
        let mut ends = Vec::with_capacity(n);
        starts.push(0);
        for i in 1..n {
            let gap = r_indices[i] - r_indices[i - 1];
            let boundary = r_indices[i - 1] + gap.div_ceil(2);
            ends.push(boundary);
            starts.push(boundary);
        }
        let last = n - 1;
        ends.push(r_indices[last] + cycle_len[last] - cycle_len[last] / 2);
        Ok(BeatGrid {
            r_indices,
            starts,
            ends,
            cycle_len,
        })
    }

    pub fn len(&self) -> usize {
        self.r_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_indices.is_empty()
    }

    /// Number of samples covered by the grid.
    pub fn span(&self) -> usize {
        *self.ends.last().unwrap_or(&0)
    }

    /// Phase of a wave at (possibly fractional) position `x` inside beat
    /// `beat`, for a wave whose apex sits `offset` samples after the r apex.
    #[inline]
    pub fn phase(&self, beat: usize, x: f64, offset: f64) -> f64 {
        let apex = self.r_indices[beat] as f64 + offset;
        wrap_phase(2.0 * PI * (x - apex) / self.cycle_len[beat] as f64)
    }
}

/// Phase signal of one wave over a whole record.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSignal {
    /// Radians in `[-π, π)`.
    pub samples: Vec<f64>,
    /// Apex offset from the r wave, samples.
    pub offset: f64,
}

impl PhaseSignal {
    pub fn from_grid(grid: &BeatGrid, offset: f64, n_samples: usize) -> Self {
        let mut samples = Vec::with_capacity(n_samples);
        for beat in 0..grid.len() {
            for n in grid.starts[beat]..grid.ends[beat].min(n_samples) {
                samples.push(grid.phase(beat, n as f64, offset));
            }
        }
        samples.resize(n_samples, 0.0);
        PhaseSignal { samples, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct WaveTerm {
    a: f64,
    b: f64,
    m_pos: f64,
    m_neg: f64,
    /// Apex offset from r, samples.
    offset: f64,
}

impl WaveTerm {
    #[inline]
    fn gradient(&self, phi: f64) -> f64 {
        gradient_at(phi, self.a, self.b, self.m_pos, self.m_neg)
    }
}

/// A clean (noise-free) synthetic ECG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEcg {
    pub samples: Vec<f64>,
    /// r apexes inside the record.
    pub r_indices: Vec<usize>,
    pub rr: RrSeries,
    pub draw: ParameterDraw,
    /// Effective t-wave delay after heart-rate adjustment, seconds.
    pub t_delay: f64,
    /// Set when some wave apex fell outside its beat and was dropped.
    pub truncated: bool,
}

/// t-wave delay adjusted for heart rate: `d_t * sqrt(mean_rr / 1 s)`.
pub fn heart_rate_adjusted_t_delay(d_t: f64, mean_rr: f64) -> f64 {
    d_t * mean_rr.sqrt()
}

/// Synthesizes `n_samples` of clean ECG for a parameter draw and RR series.
pub fn synthesize_clean(draw: &ParameterDraw, rr: &RrSeries, n_samples: usize) -> Result<CleanEcg> {
    let fs = draw.sampling_rate;
    let grid = BeatGrid::new(rr, fs)?;
    if n_samples < grid.cycle_len[0] {
        return Err(Error::invalid("n_samples", "must cover at least one full cycle"));
    }
    if grid.span() < n_samples {
        return Err(Error::invalid(
            "rr",
            format!("beats cover {} samples, {} requested", grid.span(), n_samples),
        ));
    }
    for wave in Wave::ALL {
        if !(draw.wave(wave).width > 0.0) {
            return Err(Error::invalid(format!("{}.width", wave.name()), "must be > 0"));
        }
    }

    let t_delay = heart_rate_adjusted_t_delay(draw.wave(Wave::T).delay, rr.mean());
    let terms: Vec<WaveTerm> = Wave::ALL
        .iter()
        .map(|&wave| {
            let w = draw.wave(wave);
            let delay = if wave == Wave::T { t_delay } else { w.delay };
            let (m_pos, m_neg) = if wave == Wave::T {
                (w.asymmetry, 1.0)
            } else {
                (w.asymmetry, w.asymmetry)
            };
            WaveTerm {
                a: w.amplitude,
                b: w.width,
                m_pos,
                m_neg,
                offset: delay * fs,
            }
        })
        .filter(|t| t.a != 0.0)
        .collect();

    // Gradient at integer samples and at midpoints n + 1/2, plus the phase
    // step of the beat each interval belongs to.
    let mut grad = vec![0.0; n_samples + 1];
    let mut grad_mid = vec![0.0; n_samples];
    let mut step = vec![0.0; n_samples];
    let mut beat_of = vec![0usize; n_samples + 1];
    let mut truncated = false;
    for beat in 0..grid.len() {
        let (start, end) = (grid.starts[beat], grid.ends[beat]);
        if start > n_samples {
            break;
        }
        let inv_n = 1.0 / grid.cycle_len[beat] as f64;
        let active: Vec<&WaveTerm> = terms
            .iter()
            .filter(|t| {
                let apex = grid.r_indices[beat] as f64 + t.offset;
                let inside = apex >= start as f64 && apex < end as f64;
                if !inside {
                    truncated = true;
                }
                inside
            })
            .collect();
        for n in start..end.min(n_samples + 1) {
            beat_of[n] = beat;
            let x = n as f64;
            grad[n] = active.iter().map(|t| t.gradient(grid.phase(beat, x, t.offset))).sum();
            if n < n_samples {
                grad_mid[n] = active
                    .iter()
                    .map(|t| t.gradient(grid.phase(beat, x + 0.5, t.offset)))
                    .sum();
                step[n] = inv_n;
            }
        }
    }
    if truncated {
        log::debug!("wave apex outside its beat; wave dropped for that beat");
    }

    // Cumulative Simpson integration over each sample interval.
    let mut z = vec![0.0; n_samples];
    for n in 1..n_samples {
        z[n] = z[n - 1] + step[n - 1] * (grad[n - 1] + 4.0 * grad_mid[n - 1] + grad[n]) / 6.0;
    }
    // Per-beat baseline reset.
    let mut offset = 0.0;
    for n in 0..n_samples {
        if n == grid.starts[beat_of[n]] {
            offset = z[n];
        }
        z[n] -= offset;
    }

    let r_indices = grid.r_indices.iter().copied().filter(|&r| r < n_samples).collect();
    Ok(CleanEcg {
        samples: z,
        r_indices,
        rr: rr.clone(),
        draw: *draw,
        t_delay,
        truncated,
    })
}
