//! Real-world artefact augmentation: baseline wander (BW) and muscle artefact
//! (MA) windows from recorded noise, plus a synthetic powerline sinusoid.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::seed;

/// Sampling rate every bank record must have.
pub const BANK_RATE: f64 = 250.0;
/// Minimum record length; one full segment.
pub const MIN_RECORD_LEN: usize = 1000;

/// Recorded noise sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtefactBank {
    pub bw: Vec<f64>,
    pub ma: Vec<f64>,
    pub sampling_rate: f64,
    pub source: String,
}

impl ArtefactBank {
    pub fn new(bw: Vec<f64>, ma: Vec<f64>, sampling_rate: f64, source: impl Into<String>) -> Result<Self> {
        if sampling_rate != BANK_RATE {
            return Err(Error::invalid(
                "artefact bank",
                format!("records must be sampled at {BANK_RATE} Hz, got {sampling_rate} Hz; resample before import"),
            ));
        }
        for (name, rec) in [("bw", &bw), ("ma", &ma)] {
            if rec.len() < MIN_RECORD_LEN {
                return Err(Error::invalid(
                    format!("artefact bank {name}"),
                    format!("record has {} samples, need at least {MIN_RECORD_LEN}", rec.len()),
                ));
            }
        }
        Ok(ArtefactBank {
            bw,
            ma,
            sampling_rate,
            source: source.into(),
        })
    }

    /// Loads `bw` and `ma` records from a directory. Each record may be
    /// `<name>.f32` with a `<name>.json` sidecar, or `<name>.csv` (all values
    /// concatenated in reading order). A CSV without sidecar is assumed to be
    /// sampled at 250 Hz.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<(Vec<f64>, f64)> {
            let path = find_record(dir, name)?;
            let m = io::read_matrix(&path)?;
            let fs = m.sampling_rate.unwrap_or(BANK_RATE);
            Ok((m.rows.into_iter().flatten().collect(), fs))
        };
        let (bw, fs_bw) = read("bw")?;
        let (ma, fs_ma) = read("ma")?;
        if fs_bw != fs_ma {
            return Err(Error::invalid("artefact bank", "bw and ma sampling rates differ"));
        }
        ArtefactBank::new(bw, ma, fs_bw, dir.display().to_string())
    }
}

fn find_record(dir: &Path, name: &str) -> Result<PathBuf> {
    for ext in ["f32", "csv"] {
        let p = dir.join(format!("{name}.{ext}"));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::io(
        format!("artefact bank {}: no {name}.f32 or {name}.csv", dir.display()),
        std::io::Error::from(std::io::ErrorKind::NotFound),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtefactCategory {
    Bw,
    Ma,
    BwMa,
}

/// Multiplier limits and powerline frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSettings {
    pub bw_max: f64,
    pub ma_max: f64,
    pub powerline_max: f64,
    pub powerline_hz: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            bw_max: 10.0,
            ma_max: 5.0,
            powerline_max: 0.5,
            powerline_hz: 60.0,
        }
    }
}

/// Everything random about one augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtefactDraw {
    pub category: ArtefactCategory,
    pub bw_offset: usize,
    pub ma_offset: usize,
    /// Zero when the category excludes BW.
    pub bw_gain: f64,
    /// Zero when the category excludes MA.
    pub ma_gain: f64,
    pub powerline_gain: f64,
    /// Radians.
    pub powerline_phase: f64,
}

impl ArtefactDraw {
    pub fn sample(bank: &ArtefactBank, len: usize, settings: &AugmentSettings, seed: u64) -> Result<Self> {
        for (name, rec) in [("bw", &bank.bw), ("ma", &bank.ma)] {
            if rec.len() < len {
                return Err(Error::invalid(
                    format!("artefact bank {name}"),
                    format!("record shorter ({}) than segment ({len})", rec.len()),
                ));
            }
        }
        let mut rng = seed::rng(seed);
        let category = match rng.random_range(0..3u8) {
            0 => ArtefactCategory::Bw,
            1 => ArtefactCategory::Ma,
            _ => ArtefactCategory::BwMa,
        };
        let bw_offset = rng.random_range(0..=bank.bw.len() - len);
        let ma_offset = rng.random_range(0..=bank.ma.len() - len);
        let bw_gain = rng.random::<f64>() * settings.bw_max;
        let ma_gain = rng.random::<f64>() * settings.ma_max;
        let powerline_gain = rng.random::<f64>() * settings.powerline_max;
        let powerline_phase = rng.random::<f64>() * 2.0 * PI;
        Ok(ArtefactDraw {
            category,
            bw_offset,
            ma_offset,
            bw_gain: if category == ArtefactCategory::Ma { 0.0 } else { bw_gain },
            ma_gain: if category == ArtefactCategory::Bw { 0.0 } else { ma_gain },
            powerline_gain,
            powerline_phase,
        })
    }

    /// The composite artefact for a segment of `len` samples.
    pub fn render(&self, bank: &ArtefactBank, len: usize, powerline_hz: f64) -> Vec<f64> {
        let w = 2.0 * PI * powerline_hz / bank.sampling_rate;
        (0..len)
            .map(|n| {
                self.bw_gain * bank.bw[self.bw_offset + n]
                    + self.ma_gain * bank.ma[self.ma_offset + n]
                    + self.powerline_gain * (w * n as f64 + self.powerline_phase).sin()
            })
            .collect()
    }
}

/// Adds a randomized artefact to a normalized segment. The result is not
/// renormalized.
pub fn augment(segment: &[f64], bank: &ArtefactBank, seed: u64) -> Result<Vec<f64>> {
    augment_with(segment, bank, &AugmentSettings::default(), seed).map(|(x, _)| x)
}

pub fn augment_with(
    segment: &[f64],
    bank: &ArtefactBank,
    settings: &AugmentSettings,
    seed: u64,
) -> Result<(Vec<f64>, ArtefactDraw)> {
    let draw = ArtefactDraw::sample(bank, segment.len(), settings, seed)?;
    let artefact = draw.render(bank, segment.len(), settings.powerline_hz);
    Ok((segment.iter().zip(artefact).map(|(x, a)| x + a).collect(), draw))
}
