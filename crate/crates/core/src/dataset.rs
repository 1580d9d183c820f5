//! Training-example generation and dataset export.
//!
//! Example `i` is a pure function of `(master_seed, i)`:
//! parameter draw → RR series → clean ECG → PSD noise → random window →
//! labels → (normalize + artefact, optional) → band-pass → normalize.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artefact::{self, ArtefactBank, ArtefactDraw, AugmentSettings};
use crate::conditioning::{bandpass, bandpass_zero_phase, make_labels, normalize};
use crate::error::{Error, Result};
use crate::io::{self, Format, FORMAT_VERSION};
use crate::noise::{generate_noise, NoiseSpec};
use crate::param_space::{sample_draw, ParameterDraw, ParameterSpace};
use crate::rr::{RrModel, RrSeries, RR_FLOOR};
use crate::seed::{self, StageSeeds};
use crate::waveform::synthesize_clean;

pub const DEFAULT_SEGMENT_LENGTH: usize = 1000;
pub const DEFAULT_MARGIN: usize = 500;
pub const MANIFEST_FILE: &str = "manifest.json";

fn default_segment_length() -> usize {
    DEFAULT_SEGMENT_LENGTH
}

fn default_margin() -> usize {
    DEFAULT_MARGIN
}

/// Everything that determines a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub space: ParameterSpace,
    /// Add recorded artefacts after a first normalization.
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub artefact_bank: Option<PathBuf>,
    #[serde(default)]
    pub augment_settings: AugmentSettings,
    /// Finite dataset size; `None` for an unbounded stream.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_segment_length")]
    pub segment_length: usize,
    /// Extra samples generated per example; the window start is drawn
    /// uniformly from `0..=margin`.
    #[serde(default = "default_margin")]
    pub margin: usize,
    pub master_seed: u64,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default)]
    pub zero_phase: bool,
}

fn default_format() -> Format {
    Format::F32
}

impl GenerationConfig {
    pub fn new(space: ParameterSpace, master_seed: u64) -> Self {
        GenerationConfig {
            space,
            augment: false,
            artefact_bank: None,
            augment_settings: AugmentSettings::default(),
            n: None,
            segment_length: DEFAULT_SEGMENT_LENGTH,
            margin: DEFAULT_MARGIN,
            master_seed,
            format: Format::F32,
            zero_phase: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.segment_length == 0 {
            return Err(Error::invalid("segment_length", "must be > 0"));
        }
        if self.augment && self.artefact_bank.is_none() {
            return Err(Error::invalid("artefact_bank", "augmentation needs an artefact bank"));
        }
        if self.n == Some(0) {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        Ok(())
    }

    /// Loads the artefact bank when augmentation is enabled.
    pub fn load_bank(&self) -> Result<Option<ArtefactBank>> {
        match (&self.artefact_bank, self.augment) {
            (Some(path), true) => ArtefactBank::load(path).map(Some),
            _ => Ok(None),
        }
    }

    /// Endless (or finite-set resampling) example stream for a consumer.
    pub fn stream<'a>(&'a self, bank: Option<&'a ArtefactBank>, consumer_seed: u64) -> ExampleStream<'a> {
        ExampleStream {
            config: self,
            bank,
            rng: ChaCha8Rng::seed_from_u64(consumer_seed),
            counter: 0,
        }
    }
}

/// Where a segment came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        index: u64,
        seed: u64,
        window_offset: usize,
        draw: ParameterDraw,
        artefact: Option<ArtefactDraw>,
    },
    Record {
        name: String,
        offset: usize,
    },
}

/// Conditions worth knowing about that did not stop generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleFlags {
    pub rr_clamped: bool,
    pub mu_raised: bool,
    pub wave_truncated: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub signal: Vec<f64>,
    pub labels: Vec<u8>,
    pub r_indices: Vec<usize>,
    pub provenance: Provenance,
    pub flags: ExampleFlags,
}

/// An example window before conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    /// r apexes relative to the window start.
    pub r_indices: Vec<usize>,
    pub offset: usize,
    pub draw: ParameterDraw,
    pub rr: RrSeries,
    pub seeds: StageSeeds,
    pub flags: ExampleFlags,
}

/// Generates the unconditioned window of example `index`.
pub fn synthesize_window(config: &GenerationConfig, index: u64) -> Result<RawWindow> {
    let example_seed = seed::example_seed(config.master_seed, index);
    let seeds = StageSeeds::split(example_seed);
    let fs = config.space.sampling_rate;
    let total = config.segment_length + config.margin;
    let mut flags = ExampleFlags::default();

    let mut draw = sample_draw(&config.space, seeds.draw)?;
    let headroom = draw.beta.abs() + 5.0 * draw.gamma_sd + RR_FLOOR;
    if draw.mu < headroom {
        draw.mu = headroom;
        flags.mu_raised = true;
    }
    let model = RrModel::new(draw.mu, draw.beta, draw.f_b, draw.gamma_sd);
    let seconds = total as f64 / fs + 2.0 * draw.mu + 0.5;
    let rr = model.generate_duration(seconds, seeds.rr)?;
    flags.rr_clamped = rr.clamped;

    let clean = synthesize_clean(&draw, &rr, total)?;
    flags.wave_truncated = clean.truncated;
    let noise = generate_noise(
        &NoiseSpec {
            rho: draw.rho,
            alpha: draw.alpha,
            sigma2: draw.sigma * draw.sigma,
            n_samples: total,
            fs,
        },
        seeds.noise,
    )?;

    let offset = seed::rng(seeds.window).random_range(0..=config.margin);
    let end = offset + config.segment_length;
    let window_clean = clean.samples[offset..end].to_vec();
    let noisy = window_clean
        .iter()
        .zip(&noise[offset..end])
        .map(|(c, n)| c + n)
        .collect();
    let r_indices = clean
        .r_indices
        .iter()
        .filter(|&&r| r >= offset && r < end)
        .map(|&r| r - offset)
        .collect();
    Ok(RawWindow {
        clean: window_clean,
        noisy,
        r_indices,
        offset,
        draw,
        rr,
        seeds,
        flags,
    })
}

/// Example `index` of the dataset defined by `config`.
pub fn next_example(config: &GenerationConfig, bank: Option<&ArtefactBank>, index: u64) -> Result<LabeledSegment> {
    let raw = synthesize_window(config, index)?;
    let labels = make_labels(&raw.r_indices, config.segment_length)?;
    let mut flags = raw.flags;

    let (signal, artefact) = if config.augment {
        let bank = bank.ok_or_else(|| Error::invalid("artefact_bank", "augmentation needs a loaded bank"))?;
        let pre = normalize(&raw.noisy);
        flags.degenerate |= pre.degenerate;
        let (x, d) = artefact::augment_with(&pre.samples, bank, &config.augment_settings, raw.seeds.artefact)?;
        (x, Some(d))
    } else {
        (raw.noisy, None)
    };
    let filtered = condition(&signal, config.space.sampling_rate, config.zero_phase)?;
    flags.degenerate |= filtered.1;

    Ok(LabeledSegment {
        signal: filtered.0,
        labels,
        r_indices: raw.r_indices,
        provenance: Provenance::Synthetic {
            index,
            seed: seed::example_seed(config.master_seed, index),
            window_offset: raw.offset,
            draw: raw.draw,
            artefact,
        },
        flags,
    })
}

/// Band-pass then normalize; the inference-side conditioning as well.
pub fn condition(signal: &[f64], fs: f64, zero_phase: bool) -> Result<(Vec<f64>, bool)> {
    let filtered = if zero_phase {
        bandpass_zero_phase(signal, fs)?
    } else {
        bandpass(signal, fs)?
    };
    let n = normalize(&filtered);
    Ok((n.samples, n.degenerate))
}

/// Iterator over training examples. Over a finite dataset it resamples
/// indices uniformly; otherwise it walks the index space.
pub struct ExampleStream<'a> {
    config: &'a GenerationConfig,
    bank: Option<&'a ArtefactBank>,
    rng: ChaCha8Rng,
    counter: u64,
}

impl ExampleStream<'_> {
    pub fn next_index(&mut self) -> u64 {
        match self.config.n {
            Some(n) => self.rng.random_range(0..n as u64),
            None => {
                let i = self.counter;
                self.counter += 1;
                i
            }
        }
    }
}

impl Iterator for ExampleStream<'_> {
    type Item = Result<LabeledSegment>;

    fn next(&mut self) -> Option<Self::Item> {
        let index = self.next_index();
        Some(next_example(self.config, self.bank, index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub signals: String,
    pub labels: String,
    pub r_indices: String,
}

/// Replaying a manifest regenerates its dataset bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub kind: String,
    pub generator: String,
    pub config: GenerationConfig,
    pub n: usize,
    pub segment_length: usize,
    pub sampling_rate: f64,
    pub files: DatasetFiles,
    /// Per-example seeds, in index order.
    pub seeds: Vec<u64>,
    pub flag_counts: FlagCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub rr_clamped: usize,
    pub mu_raised: usize,
    pub wave_truncated: usize,
    pub degenerate: usize,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::format(
                &path,
                format!("unsupported format_version {}", m.format_version),
            ));
        }
        Ok(m)
    }
}

/// Generates examples `0..n` in parallel (index order preserved) and writes
/// signals, labels, r indices and the manifest into `out`.
pub fn export_dataset(config: &GenerationConfig, n: usize, out: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let bank = config.load_bank()?;
    let examples: Vec<LabeledSegment> = (0..n as u64)
        .into_par_iter()
        .map(|i| next_example(config, bank.as_ref(), i))
        .collect::<Result<_>>()?;

    fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    let signals: Vec<Vec<f32>> = examples
        .iter()
        .map(|e| e.signal.iter().map(|&v| v as f32).collect())
        .collect();
    let labels: Vec<Vec<u8>> = examples.iter().map(|e| e.labels.clone()).collect();
    let r_rows: Vec<Vec<f32>> = examples
        .iter()
        .map(|e| e.r_indices.iter().map(|&r| r as f32).collect())
        .collect();
    let fs_rate = config.space.sampling_rate;
    let sig_path = io::write_f32_matrix(&out.join("signals"), &signals, config.format, Some(fs_rate))?;
    let lab_path = io::write_u8_matrix(&out.join("labels"), &labels, config.format)?;
    let r_path = io::write_f32_matrix(&out.join("r_indices"), &r_rows, Format::Csv, None)?;

    let mut flag_counts = FlagCounts::default();
    for e in &examples {
        flag_counts.rr_clamped += e.flags.rr_clamped as usize;
        flag_counts.mu_raised += e.flags.mu_raised as usize;
        flag_counts.wave_truncated += e.flags.wave_truncated as usize;
        flag_counts.degenerate += e.flags.degenerate as usize;
    }
    let name = |p: &Path| {
        p.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut echo = config.clone();
    echo.n = Some(n);
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        kind: "ecg-synth-dataset".to_string(),
        generator: concat!("ecg-synth ", env!("CARGO_PKG_VERSION")).to_string(),
        config: echo,
        n,
        segment_length: config.segment_length,
        sampling_rate: fs_rate,
        files: DatasetFiles {
            signals: name(&sig_path),
            labels: name(&lab_path),
            r_indices: name(&r_path),
        },
        seeds: (0..n as u64)
            .map(|i| seed::example_seed(config.master_seed, i))
            .collect(),
        flag_counts,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}

/// Regenerates a dataset from its manifest into `out`.
pub fn replay_manifest(manifest: &Path, out: &Path) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(manifest)?;
    export_dataset(&m.config, m.n, out)
}

/// A dataset read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub signals: Vec<Vec<f32>>,
    pub labels: Vec<Vec<u8>>,
    pub r_indices: Vec<Vec<usize>>,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(dir)?;
    let signals = io::read_matrix(&dir.join(&manifest.files.signals))?
        .rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as f32).collect())
        .collect::<Vec<Vec<f32>>>();
    let labels = io::read_matrix(&dir.join(&manifest.files.labels))?
        .rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as u8).collect())
        .collect::<Vec<Vec<u8>>>();
    let r_indices = io::read_matrix(&dir.join(&manifest.files.r_indices))?
        .rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as usize).collect())
        .collect::<Vec<Vec<usize>>>();
    if signals.len() != manifest.n || labels.len() != manifest.n || r_indices.len() != manifest.n {
        return Err(Error::format(dir, "row counts disagree with manifest"));
    }
    Ok(Dataset {
        manifest,
        signals,
        labels,
        r_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_space::{default_space, Scaling};

    fn config(c: f64) -> GenerationConfig {
        GenerationConfig::new(default_space().with_scaling(Scaling::uniform(c)), 7)
    }

    #[test]
    fn example_shape_and_range() {
        let cfg = config(1.0);
        let e = next_example(&cfg, None, 0).unwrap();
        assert_eq!(e.signal.len(), 1000);
        assert_eq!(e.labels.len(), 1000);
        assert!(e.signal.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(e.signal.contains(&1.0) && e.signal.contains(&-1.0));
        assert!(e.r_indices.len() >= 3);
        assert_eq!(e.labels, make_labels(&e.r_indices, 1000).unwrap());
    }

    #[test]
    fn same_index_same_bytes() {
        let cfg = config(3.0);
        for i in [0, 5, 123] {
            assert_eq!(
                next_example(&cfg, None, i).unwrap(),
                next_example(&cfg, None, i).unwrap()
            );
        }
        assert_ne!(
            next_example(&cfg, None, 0).unwrap().signal,
            next_example(&cfg, None, 1).unwrap().signal
        );
    }

    #[test]
    fn pipeline_matches_stepwise_oracle() {
        let cfg = config(2.0);
        let raw = synthesize_window(&cfg, 11).unwrap();
        let e = next_example(&cfg, None, 11).unwrap();
        let expected = normalize(&bandpass(&raw.noisy, 250.0).unwrap()).samples;
        assert_eq!(e.signal, expected);
    }

    #[test]
    fn augmented_pipeline_matches_stepwise_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let rec: Vec<f32> = (0..3000).map(|i| ((i as f32) * 0.01).sin()).collect();
        io::write_f32_matrix(
            &dir.path().join("bw"),
            std::slice::from_ref(&rec),
            Format::F32,
            Some(250.0),
        )
        .unwrap();
        io::write_f32_matrix(&dir.path().join("ma"), &[rec], Format::F32, Some(250.0)).unwrap();
        let mut cfg = config(1.0);
        cfg.augment = true;
        cfg.artefact_bank = Some(dir.path().to_path_buf());
        let bank = cfg.load_bank().unwrap().unwrap();
        let raw = synthesize_window(&cfg, 4).unwrap();
        let e = next_example(&cfg, Some(&bank), 4).unwrap();
        let step3 = artefact::augment(&normalize(&raw.noisy).samples, &bank, raw.seeds.artefact).unwrap();
        let expected = normalize(&bandpass(&step3, 250.0).unwrap()).samples;
        assert_eq!(e.signal, expected);
        assert!(matches!(e.provenance, Provenance::Synthetic { artefact: Some(_), .. }));
        assert!(next_example(&cfg, None, 4).is_err());
    }

    #[test]
    fn r_indices_on_clean_local_maxima() {
        let cfg = config(1.0);
        for i in 0..40 {
            let raw = synthesize_window(&cfg, i).unwrap();
            for &r in &raw.r_indices {
                let lo = r.saturating_sub(3);
                let hi = (r + 4).min(raw.clean.len());
                let argmax = (lo..hi).fold(lo, |b, j| if raw.clean[j] > raw.clean[b] { j } else { b });
                assert!(argmax.abs_diff(r) <= 1, "example {i}: r {r} argmax {argmax}");
            }
        }
    }

    #[test]
    fn frozen_space_gives_shifted_copies_of_one_template() {
        let cfg = config(0.0);
        let long = {
            let raw = synthesize_window(&cfg, 0).unwrap();
            let total = cfg.segment_length + cfg.margin;
            let clean = synthesize_clean(&raw.draw, &raw.rr, total).unwrap();
            clean.samples
        };
        let mut offsets = std::collections::BTreeSet::new();
        for i in 0..20 {
            let raw = synthesize_window(&cfg, i).unwrap();
            assert_eq!(raw.noisy, raw.clean);
            assert_eq!(raw.clean, long[raw.offset..raw.offset + 1000].to_vec());
            offsets.insert(raw.offset);
        }
        assert!(offsets.len() > 10);
    }

    #[test]
    fn finite_dataset_stream_resamples_members() {
        let mut cfg = config(1.0);
        cfg.n = Some(16);
        let members: Vec<Vec<f64>> = (0..16).map(|i| next_example(&cfg, None, i).unwrap().signal).collect();
        let mut seen = std::collections::HashSet::new();
        for e in cfg.stream(None, 3).take(200) {
            let e = e.unwrap();
            let pos = members
                .iter()
                .position(|m| *m == e.signal)
                .expect("member of the finite set");
            seen.insert(pos);
        }
        assert_eq!(seen.len(), 16);
        cfg.n = None;
        let mut s = cfg.stream(None, 3);
        assert_eq!((s.next_index(), s.next_index()), (0, 1));
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for format in [Format::F32, Format::Csv] {
            let mut cfg = config(1.0);
            cfg.format = format;
            let out = dir.path().join(format!("{format:?}"));
            let m = export_dataset(&cfg, 12, &out).unwrap();
            assert_eq!(m.seeds.len(), 12);
            let ds = load_dataset(&out).unwrap();
            assert_eq!(ds.manifest, m);
            for i in 0..12 {
                let e = next_example(&cfg, None, i as u64).unwrap();
                let sig: Vec<f32> = e.signal.iter().map(|&v| v as f32).collect();
                assert_eq!(ds.signals[i], sig);
                assert_eq!(ds.labels[i], e.labels);
                assert_eq!(ds.r_indices[i], e.r_indices);
            }
        }
    }

    #[test]
    fn manifest_replay_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(3.0);
        export_dataset(&cfg, 20, &dir.path().join("a")).unwrap();
        replay_manifest(&dir.path().join("a"), &dir.path().join("b")).unwrap();
        for f in [
            "signals.f32",
            "signals.json",
            "labels.u8",
            "labels.json",
            "r_indices.csv",
            "manifest.json",
        ] {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = config(1.0);
        cfg.augment = true;
        assert!(cfg.validate().is_err());
        let cfg = config(-1.0);
        assert!(export_dataset(&cfg, 1, Path::new("/nonexistent/never")).is_err());
    }
}
