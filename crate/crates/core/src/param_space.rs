//! Randomizable generator parameters, their baseline ranges and the weighted
//! range scaling controlled by the coefficient `C`.
//!
//! A range `(l_low, l_high)` is ordered by magnitude so that `l_low` is the
//! limit closer to zero. Scaling by `C` widens it symmetrically by
//!
//! ```text
//! d = |l_low - l_high| * (C - 1) * l_low / (l_low + l_high)
//! ```
//!
//! giving `(l_low - d, l_high + d)`. Limits near zero therefore move gently.
//! Ranges anchored at zero (all noise ranges) keep their lower limit at
//! exactly zero and only stretch the upper limit by `C`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Smallest wave width (phase units) a draw may take after scaling.
pub const MIN_WIDTH: f64 = 5e-3;
/// Asymmetry factors below one would flatten the falling edge into a step.
pub const MIN_ASYMMETRY: f64 = 1.0;

/// A generator parameter: either a constant or a uniform range.
///
/// Serializes as a bare number or a two-element array, mirroring the way the
/// baseline table lists values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Fixed(f64),
    Range([f64; 2]),
}

impl Param {
    pub const fn range(a: f64, b: f64) -> Self {
        Param::Range([a, b])
    }

    /// Limits in listed order; constants return `(v, v)`.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            Param::Fixed(v) => (v, v),
            Param::Range([a, b]) => (a, b),
        }
    }

    fn scaled(&self, name: &str, c: f64) -> Result<(f64, f64)> {
        match *self {
            Param::Fixed(v) => Ok((v, v)),
            Param::Range([a, b]) => scale_range(a, b, c).map_err(|e| rename(e, name)),
        }
    }
}

fn rename(err: Error, name: &str) -> Error {
    match err {
        Error::DegenerateRange { low, high, .. } => Error::DegenerateRange {
            name: name.to_string(),
            low,
            high,
        },
        other => other,
    }
}

/// Weighted scaling of one range by `c`.
///
/// The result is returned as `(scaled l_low, scaled l_high)`, i.e. ordered by
/// the magnitude of the input limits. Same-sign negative ranges are scaled on
/// their magnitudes and the sign is reapplied, so large `c` may push the
/// near-zero limit through zero (an inverted wave).
pub fn scale_range(low: f64, high: f64, c: f64) -> Result<(f64, f64)> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(
            "C",
            format!("scaling coefficient must be >= 0, got {c}"),
        ));
    }
    if !low.is_finite() || !high.is_finite() {
        return Err(Error::invalid("range", "limits must be finite"));
    }
    let negative = low <= 0.0 && high <= 0.0 && (low < 0.0 || high < 0.0);
    let (a, b) = if negative { (-low, -high) } else { (low, high) };
    let (l_low, l_high) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };

    let (lo, hi) = if l_low == 0.0 {
        (0.0, l_high * c)
    } else {
        let sum = l_low + l_high;
        if sum == 0.0 {
            return Err(Error::DegenerateRange {
                name: String::new(),
                low,
                high,
            });
        }
        let d = (l_low - l_high).abs() * (c - 1.0) * l_low / sum;
        (l_low - d, l_high + d)
    };
    Ok(if negative { (-lo, -hi) } else { (lo, hi) })
}

/// Ranges for one of the p, q, r, s, t waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveShape {
    /// Peak amplitude relative to the r wave.
    pub amplitude: Param,
    /// Gaussian width in phase units.
    pub width: Param,
    /// Delay to the r peak in seconds.
    pub delay: Param,
    /// Asymmetry factor applied on the trailing (positive phase) side.
    pub asymmetry: Param,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveRanges {
    pub p: WaveShape,
    pub q: WaveShape,
    pub r: WaveShape,
    pub s: WaveShape,
    pub t: WaveShape,
}

impl WaveRanges {
    pub fn iter(&self) -> impl Iterator<Item = (Wave, &WaveShape)> {
        [
            (Wave::P, &self.p),
            (Wave::Q, &self.q),
            (Wave::R, &self.r),
            (Wave::S, &self.s),
            (Wave::T, &self.t),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    P,
    Q,
    R,
    S,
    T,
}

impl Wave {
    pub const ALL: [Wave; 5] = [Wave::P, Wave::Q, Wave::R, Wave::S, Wave::T];

    pub fn name(self) -> &'static str {
        match self {
            Wave::P => "p",
            Wave::Q => "q",
            Wave::R => "r",
            Wave::S => "s",
            Wave::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrRanges {
    /// Mean RR interval, seconds.
    pub mu: Param,
    /// Breathing frequency, Hz.
    pub f_b: f64,
    /// Breathing coupling, seconds.
    pub beta: f64,
    /// Standard deviation of the white stochastic term, seconds.
    #[serde(default)]
    pub gamma_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRanges {
    /// White-noise standard deviation; squared into the PSD floor.
    pub sigma: Param,
    /// Power-law exponent.
    pub alpha: Param,
    /// Power-law constant, multiplied by `alpha^2` after sampling.
    pub rho: Param,
}

/// Per-group scaling coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub rr: f64,
    pub wave: f64,
    pub fiducial: f64,
    pub noise: f64,
    /// Scale the r-wave amplitude and width ranges too.
    #[serde(default)]
    pub scale_r: bool,
}

impl Scaling {
    pub fn uniform(c: f64) -> Self {
        Scaling {
            rr: c,
            wave: c,
            fiducial: c,
            noise: c,
            scale_r: false,
        }
    }
}

impl Default for Scaling {
    fn default() -> Self {
        Scaling::uniform(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub waves: WaveRanges,
    pub rr: RrRanges,
    pub noise: NoiseRanges,
    #[serde(default)]
    pub scaling: Scaling,
    /// Hz.
    pub sampling_rate: f64,
}

impl Default for ParameterSpace {
    fn default() -> Self {
        default_space()
    }
}

/// Baseline ranges, corresponding to `C = 1`.
pub fn default_space() -> ParameterSpace {
    use Param::{Fixed, Range};
    ParameterSpace {
        waves: WaveRanges {
            p: WaveShape {
                amplitude: Range([0.05, 0.2]),
                width: Range([0.065, 0.085]),
                delay: Range([-0.12, -0.18]),
                asymmetry: Fixed(1.0),
            },
            q: WaveShape {
                amplitude: Range([-0.05, -0.2]),
                width: Range([0.03, 0.08]),
                delay: Range([-0.03, -0.05]),
                asymmetry: Fixed(1.0),
            },
            r: WaveShape {
                amplitude: Range([0.8, 1.2]),
                width: Range([0.06, 0.085]),
                delay: Fixed(0.0),
                asymmetry: Fixed(1.0),
            },
            s: WaveShape {
                amplitude: Range([-0.05, -0.2]),
                width: Range([0.03, 0.08]),
                delay: Range([0.03, 0.05]),
                asymmetry: Fixed(1.0),
            },
            t: WaveShape {
                amplitude: Range([0.1, 0.6]),
                width: Range([0.085, 0.21]),
                delay: Range([0.2, 0.25]),
                asymmetry: Range([1.0, 3.0]),
            },
        },
        rr: RrRanges {
            mu: Range([0.75, 1.0]),
            f_b: 0.28,
            beta: 0.1,
            gamma_sd: 0.0,
        },
        noise: NoiseRanges {
            sigma: Range([0.0, 0.17e-3]),
            alpha: Range([0.0, 0.67]),
            rho: Range([0.0, 4e-3]),
        },
        scaling: Scaling::default(),
        sampling_rate: 250.0,
    }
}

/// Sampling bounds of one parameter after scaling, plus whether its group is
/// frozen (`C = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
    pub frozen: bool,
}

impl Bounds {
    pub fn min(&self) -> f64 {
        self.low.min(self.high)
    }

    pub fn max(&self) -> f64 {
        self.low.max(self.high)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, v: f64) -> bool {
        let eps = 1e-12 * (1.0 + self.max().abs());
        v >= self.min() - eps && v <= self.max() + eps
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        // One uniform is consumed even when frozen so the stream layout does
        // not depend on the scaling coefficients.
        let u: f64 = rng.random();
        if self.frozen {
            self.midpoint()
        } else {
            let (lo, hi) = (self.min(), self.max());
            lo + u * (hi - lo)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveBounds {
    pub amplitude: Bounds,
    pub width: Bounds,
    pub delay: Bounds,
    pub asymmetry: Bounds,
}

/// A parameter space with every range resolved against its group's `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSpace {
    pub waves: [WaveBounds; 5],
    pub mu: Bounds,
    pub sigma: Bounds,
    pub alpha: Bounds,
    pub rho: Bounds,
}

impl ScaledSpace {
    pub fn wave(&self, wave: Wave) -> &WaveBounds {
        &self.waves[wave as usize]
    }
}

impl ParameterSpace {
    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let space: ParameterSpace =
            serde_json::from_str(text).map_err(|e| Error::invalid("parameter space", e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter space serializes")
    }

    /// Checks coefficients, rates and that every range can be scaled.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scaling;
        for (name, c) in [
            ("scale_rr", s.rr),
            ("scale_wave", s.wave),
            ("scale_fiducial", s.fiducial),
            ("scale_noise", s.noise),
        ] {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::invalid(name, format!("must be a finite value >= 0, got {c}")));
            }
        }
        if !(self.sampling_rate > 0.0) || !self.sampling_rate.is_finite() {
            return Err(Error::invalid("sampling_rate", "must be > 0"));
        }
        let (mu_a, mu_b) = self.rr.mu.limits();
        if !(mu_a.min(mu_b) > 0.0) {
            return Err(Error::invalid("rr.mu", "lower limit must be > 0"));
        }
        if !(self.rr.f_b > 0.0) {
            return Err(Error::invalid("rr.f_b", "must be > 0"));
        }
        if !(self.rr.gamma_sd >= 0.0) || !(self.rr.beta >= 0.0) {
            return Err(Error::invalid("rr", "beta and gamma_sd must be >= 0"));
        }
        for (name, p) in [
            ("noise.sigma", self.noise.sigma),
            ("noise.alpha", self.noise.alpha),
            ("noise.rho", self.noise.rho),
        ] {
            let (a, b) = p.limits();
            if a.min(b) != 0.0 || a.max(b) < 0.0 {
                return Err(Error::invalid(name, "noise ranges must have lower limit 0"));
            }
        }
        for (wave, shape) in self.waves.iter() {
            let (a, b) = shape.width.limits();
            if !(a.min(b) > 0.0) {
                return Err(Error::invalid(format!("waves.{}.width", wave.name()), "must be > 0"));
            }
        }
        self.scaled().map(|_| ())
    }

    /// Resolves every range against its group's scaling coefficient.
    pub fn scaled(&self) -> Result<ScaledSpace> {
        let s = &self.scaling;
        let bounds = |name: &str, p: &Param, c: f64, scalable: bool| -> Result<Bounds> {
            let (low, high) = if scalable { p.scaled(name, c)? } else { p.limits() };
            Ok(Bounds {
                low,
                high,
                frozen: c == 0.0,
            })
        };
        let mut waves = [WaveBounds {
            amplitude: Bounds {
                low: 0.0,
                high: 0.0,
                frozen: false,
            },
            width: Bounds {
                low: 0.0,
                high: 0.0,
                frozen: false,
            },
            delay: Bounds {
                low: 0.0,
                high: 0.0,
                frozen: false,
            },
            asymmetry: Bounds {
                low: 0.0,
                high: 0.0,
                frozen: false,
            },
        }; 5];
        for (wave, shape) in self.waves.iter() {
            let shape_scalable = wave != Wave::R || s.scale_r;
            let n = wave.name();
            waves[wave as usize] = WaveBounds {
                amplitude: bounds(
                    &format!("waves.{n}.amplitude"),
                    &shape.amplitude,
                    s.wave,
                    shape_scalable,
                )?,
                width: bounds(&format!("waves.{n}.width"), &shape.width, s.wave, shape_scalable)?,
                delay: bounds(&format!("waves.{n}.delay"), &shape.delay, s.fiducial, wave != Wave::R)?,
                asymmetry: bounds(
                    &format!("waves.{n}.asymmetry"),
                    &shape.asymmetry,
                    s.wave,
                    shape_scalable,
                )?,
            };
        }
        Ok(ScaledSpace {
            waves,
            mu: bounds("rr.mu", &self.rr.mu, s.rr, true)?,
            sigma: bounds("noise.sigma", &self.noise.sigma, s.noise, true)?,
            alpha: bounds("noise.alpha", &self.noise.alpha, s.noise, true)?,
            rho: bounds("noise.rho", &self.noise.rho, s.noise, true)?,
        })
    }
}

/// Concrete values for one wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveDraw {
    pub amplitude: f64,
    pub width: f64,
    /// Seconds to the r peak, before any heart-rate dependent adjustment.
    pub delay: f64,
    pub asymmetry: f64,
}

/// One concrete draw from a parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterDraw {
    pub waves: [WaveDraw; 5],
    pub mu: f64,
    pub f_b: f64,
    pub beta: f64,
    pub gamma_sd: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Already multiplied by `alpha^2`.
    pub rho: f64,
    pub sampling_rate: f64,
    pub seed: u64,
}

impl ParameterDraw {
    pub fn wave(&self, wave: Wave) -> &WaveDraw {
        &self.waves[wave as usize]
    }

    pub fn wave_mut(&mut self, wave: Wave) -> &mut WaveDraw {
        &mut self.waves[wave as usize]
    }

    /// Every parameter at the midpoint of its scaled range. Used for model
    /// fitting dumps.
    pub fn midpoint(space: &ParameterSpace) -> Result<Self> {
        space.validate()?;
        let scaled = space.scaled()?;
        let mut waves = [WaveDraw {
            amplitude: 0.0,
            width: 0.0,
            delay: 0.0,
            asymmetry: 1.0,
        }; 5];
        for wave in Wave::ALL {
            let b = scaled.wave(wave);
            waves[wave as usize] = WaveDraw {
                amplitude: b.amplitude.midpoint(),
                width: b.width.midpoint().max(MIN_WIDTH),
                delay: b.delay.midpoint(),
                asymmetry: b.asymmetry.midpoint().max(MIN_ASYMMETRY),
            };
        }
        let alpha = scaled.alpha.midpoint();
        Ok(ParameterDraw {
            waves,
            mu: scaled.mu.midpoint(),
            f_b: space.rr.f_b,
            beta: space.rr.beta,
            gamma_sd: space.rr.gamma_sd,
            sigma: scaled.sigma.midpoint(),
            alpha,
            rho: scaled.rho.midpoint() * alpha * alpha,
            sampling_rate: space.sampling_rate,
            seed: 0,
        })
    }

    /// A draw with every wave silenced except those listed.
    pub fn isolate(mut self, keep: &[Wave]) -> Self {
        for wave in Wave::ALL {
            if !keep.contains(&wave) {
                self.wave_mut(wave).amplitude = 0.0;
            }
        }
        self
    }
}

/// Samples every ranged parameter independently and uniformly from its scaled
/// range. Groups with `C = 0` are frozen at their range midpoint.
pub fn sample_draw(space: &ParameterSpace, seed: u64) -> Result<ParameterDraw> {
    space.validate()?;
    let scaled = space.scaled()?;
    let mut rng = seed::rng(seed);
    let mut waves = [WaveDraw {
        amplitude: 0.0,
        width: 0.0,
        delay: 0.0,
        asymmetry: 1.0,
    }; 5];
    for wave in Wave::ALL {
        let b = scaled.wave(wave);
        waves[wave as usize] = WaveDraw {
            amplitude: b.amplitude.sample(&mut rng),
            width: b.width.sample(&mut rng).max(MIN_WIDTH),
            delay: b.delay.sample(&mut rng),
            asymmetry: b.asymmetry.sample(&mut rng).max(MIN_ASYMMETRY),
        };
    }
    let mu = scaled.mu.sample(&mut rng);
    let sigma = scaled.sigma.sample(&mut rng);
    let alpha = scaled.alpha.sample(&mut rng);
    let rho = scaled.rho.sample(&mut rng) * alpha * alpha;
    Ok(ParameterDraw {
        waves,
        mu,
        f_b: space.rr.f_b,
        beta: space.rr.beta,
        gamma_sd: space.rr.gamma_sd,
        sigma,
        alpha,
        rho,
        sampling_rate: space.sampling_rate,
        seed,
    })
}
