//! `ecg-synth` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration or validation, 4 I/O.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ecg_synth::artefact::{self, ArtefactBank};
use ecg_synth::conditioning::{normalize, snap_to_max};
use ecg_synth::dataset::{export_dataset, replay_manifest, GenerationConfig, DEFAULT_SEGMENT_LENGTH};
use ecg_synth::io::{self, Format, FORMAT_VERSION};
use ecg_synth::metrics::{self, Aggregate, DEFAULT_TOLERANCE};
use ecg_synth::noise::{generate_noise, periodogram, NoiseSpec};
use ecg_synth::param_space::{default_space, ParameterDraw, ParameterSpace, Scaling};
use ecg_synth::postprocess::{self, segment_offsets, PeakParams, SEGMENT_LENGTH, SEGMENT_STRIDE};
use ecg_synth::rr::RrModel;
use ecg_synth::seed;
use ecg_synth::waveform::{synthesize_clean, BeatGrid};

const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ecg-synth",
    version,
    about = "Synthetic ECG generation, r-wave detection and scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled training dataset.
    Generate(GenerateArgs),
    /// Emit one noise realization with analytic and empirical PSD.
    Noise(NoiseArgs),
    /// Add recorded artefacts to normalized segments.
    Augment(AugmentArgs),
    /// Turn probability traces into r-wave indices.
    Detect(DetectArgs),
    /// Score detections against ground truth.
    Evaluate(EvaluateArgs),
    /// Dump a clean waveform and its parameters for model fitting.
    FitDump(FitDumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    F32,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::F32 => Format::F32,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Args, Clone)]
struct SpaceArgs {
    /// JSON parameter space, or a full generation config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scaling coefficient shared by every group.
    #[arg(long, allow_negative_numbers = true)]
    scale: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    scale_rr: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    scale_wave: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    scale_fiducial: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    scale_noise: Option<f64>,
    /// Scale the r-wave amplitude and width ranges as well.
    #[arg(long)]
    scale_r: bool,
}

impl SpaceArgs {
    /// The config file (if any) with explicit flags applied on top.
    fn resolve(&self) -> anyhow::Result<(GenerationConfig, bool)> {
        let (mut config, from_file) = match &self.config {
            Some(path) => (read_config(path)?, true),
            None => (GenerationConfig::new(default_space(), 0), false),
        };
        let s = &mut config.space.scaling;
        if let Some(c) = self.scale {
            *s = Scaling {
                scale_r: s.scale_r,
                ..Scaling::uniform(c)
            };
        }
        for (slot, v) in [
            (&mut s.rr, self.scale_rr),
            (&mut s.wave, self.scale_wave),
            (&mut s.fiducial, self.scale_fiducial),
            (&mut s.noise, self.scale_noise),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        s.scale_r |= self.scale_r;
        config.space.validate()?;
        Ok((config, from_file))
    }
}

fn read_config(path: &Path) -> anyhow::Result<GenerationConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    if let Ok(config) = serde_json::from_str::<GenerationConfig>(&text) {
        return Ok(config);
    }
    let space = ParameterSpace::from_json(&text).with_context(|| format!("config {}", path.display()))?;
    Ok(GenerationConfig::new(space, 0))
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Master seed; drawn from entropy and echoed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    format: FormatArg,
    /// Directory with bw and ma records; enables artefact augmentation.
    #[arg(long, alias = "artefact-bank", value_name = "DIR")]
    artefacts: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LENGTH)]
    segment_length: usize,
    /// Forward-backward band-pass instead of a single forward pass.
    #[arg(long)]
    zero_phase: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Regenerate the dataset described by a manifest; other flags are ignored.
    #[arg(long, value_name = "MANIFEST")]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// White-noise variance.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma2: f64,
    #[arg(long, default_value_t = 65536)]
    n: usize,
    #[arg(long, default_value_t = 250.0)]
    fs: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Realizations averaged into the empirical PSD.
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Matrix of segments, one per row.
    #[arg(long)]
    input: PathBuf,
    /// Directory with bw and ma records.
    #[arg(long, value_name = "DIR")]
    artefacts: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output stem; the extension follows `--format`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    format: FormatArg,
}

#[derive(Args)]
struct DetectArgs {
    /// ECG matrix, one record per row.
    #[arg(long)]
    ecg: PathBuf,
    /// Probability matrix: one trace per record, or per-segment rows with `--segmented`.
    #[arg(long)]
    prob: PathBuf,
    /// Probability rows are 1000-sample segment predictions at stride 250.
    #[arg(long)]
    segmented: bool,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value_t = 75)]
    min_distance: usize,
    #[arg(long, default_value_t = 250.0)]
    fs: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    detected: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: usize,
    /// ECG matrix used to snap truth indices to the local maximum.
    #[arg(long)]
    ecg: Option<PathBuf>,
    /// Snapping window, samples.
    #[arg(long, requires = "ecg")]
    snap: Option<usize>,
    /// Sample-wise labels for ROC-AUC.
    #[arg(long, requires = "prob")]
    labels: Option<PathBuf>,
    /// Sample-wise probabilities for ROC-AUC.
    #[arg(long, requires = "labels")]
    prob: Option<PathBuf>,
    /// Per-record scores as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct FitDumpArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Explicit parameter draw (JSON); defaults to the range midpoints.
    #[arg(long)]
    draw: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    beats: usize,
    /// Remove respiratory modulation and RR jitter.
    #[arg(long)]
    steady: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn io_error(path: &Path, e: std::io::Error) -> anyhow::Error {
    anyhow::Error::new(e).context(format!("{}", path.display()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<ecg_synth::Error>() {
            return match err {
                ecg_synth::Error::Io { .. } | ecg_synth::Error::Format { .. } => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Noise(a) => noise(a),
        Command::Augment(a) => augment(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::FitDump(a) => fit_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return Err(ecg_synth::Error::InvalidParameter {
                name: "jobs".into(),
                reason: "must be >= 1".into(),
            }
            .into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    if let Some(manifest) = &a.from_manifest {
        let m = replay_manifest(manifest, &a.out)?;
        log::info!("replayed {} examples into {}", m.n, a.out.display());
        println!("{}", serde_json::to_string(&summary(&m.config, m.n, &a.out))?);
        return Ok(());
    }
    let (mut config, from_file) = a.space.resolve()?;
    if !from_file || a.seed.is_some() {
        config.master_seed = seed_or_entropy(a.seed);
    }
    config.format = a.format.into();
    config.segment_length = a.segment_length;
    config.zero_phase |= a.zero_phase;
    if let Some(bank) = &a.artefacts {
        config.augment = true;
        config.artefact_bank = Some(bank.clone());
    }
    config.n = Some(a.n);
    config.validate()?;
    let m = export_dataset(&config, a.n, &a.out)?;
    let fc = m.flag_counts;
    if fc.rr_clamped + fc.mu_raised + fc.wave_truncated + fc.degenerate > 0 {
        log::warn!(
            "flags: rr_clamped={} mu_raised={} wave_truncated={} degenerate={}",
            fc.rr_clamped,
            fc.mu_raised,
            fc.wave_truncated,
            fc.degenerate
        );
    }
    println!("{}", serde_json::to_string(&summary(&config, a.n, &a.out))?);
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary {
    format_version: u32,
    n: usize,
    seed: u64,
    out: String,
}

fn summary(config: &GenerationConfig, n: usize, out: &Path) -> GenerateSummary {
    GenerateSummary {
        format_version: FORMAT_VERSION,
        n,
        seed: config.master_seed,
        out: out.display().to_string(),
    }
}

#[derive(Serialize)]
struct NoiseMeta<'a> {
    format_version: u32,
    spec: &'a NoiseSpec,
    seed: u64,
    realizations: usize,
}

fn noise(a: NoiseArgs) -> anyhow::Result<()> {
    let spec = NoiseSpec {
        rho: a.rho,
        alpha: a.alpha,
        sigma2: a.sigma2,
        n_samples: a.n,
        fs: a.fs,
    };
    spec.validate()?;
    if a.realizations == 0 {
        return Err(anyhow!(ecg_synth::Error::InvalidParameter {
            name: "realizations".into(),
            reason: "must be >= 1".into(),
        }));
    }
    let master = seed_or_entropy(a.seed);
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;

    let first = generate_noise(&spec, seed::example_seed(master, 0))?;
    let mut psd = periodogram(&first);
    for k in 1..a.realizations {
        let x = generate_noise(&spec, seed::example_seed(master, k as u64))?;
        for (acc, p) in psd.iter_mut().zip(periodogram(&x)) {
            *acc += p;
        }
    }
    psd.iter_mut().for_each(|p| *p /= a.realizations as f64);

    let mut text = String::from("t,sample\n");
    for (n, v) in first.iter().enumerate() {
        text.push_str(&format!("{},{}\n", n as f64 / a.fs, v));
    }
    write_text(&a.out.join("noise.csv"), &text)?;

    let mut text = String::from("f,analytic,empirical\n");
    for (f, p) in spec.frequencies().iter().zip(&psd) {
        text.push_str(&format!("{f},{},{p}\n", spec.psd(*f)));
    }
    write_text(&a.out.join("psd.csv"), &text)?;

    let meta = NoiseMeta {
        format_version: FORMAT_VERSION,
        spec: &spec,
        seed: master,
        realizations: a.realizations,
    };
    write_text(
        &a.out.join("noise.json"),
        &(serde_json::to_string_pretty(&meta)? + "\n"),
    )
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn augment(a: AugmentArgs) -> anyhow::Result<()> {
    let bank = ArtefactBank::load(&a.artefacts)?;
    let input = io::read_matrix(&a.input)?;
    let master = seed_or_entropy(a.seed);
    let mut rows = Vec::with_capacity(input.rows.len());
    for (i, row) in input.rows.iter().enumerate() {
        let norm = normalize(row);
        let x = artefact::augment(&norm.samples, &bank, seed::example_seed(master, i as u64))?;
        rows.push(x.into_iter().map(|v| v as f32).collect::<Vec<f32>>());
    }
    let path = io::write_f32_matrix(
        &a.out,
        &rows,
        a.format.into(),
        input.sampling_rate.or(Some(bank.sampling_rate)),
    )?;
    eprintln!("wrote {} segments to {}", rows.len(), path.display());
    Ok(())
}

fn detect(a: DetectArgs) -> anyhow::Result<()> {
    let ecg = io::read_matrix(&a.ecg)?;
    let prob = io::read_matrix(&a.prob)?;
    let fs = ecg.sampling_rate.unwrap_or(a.fs);
    let params = PeakParams {
        threshold: a.threshold,
        min_distance: a.min_distance,
        ..PeakParams::default()
    };
    if !(params.threshold.is_finite()) || params.min_distance == 0 {
        return Err(anyhow!(ecg_synth::Error::InvalidParameter {
            name: "threshold/min-distance".into(),
            reason: "threshold must be finite and min-distance >= 1".into(),
        }));
    }

    let mut out = Vec::new();
    let mut next_row = 0;
    for (r, record) in ecg.rows.iter().enumerate() {
        let result = if a.segmented {
            let k = segment_offsets(record.len(), SEGMENT_LENGTH, SEGMENT_STRIDE).len();
            let segs = prob.rows.get(next_row..next_row + k).ok_or_else(|| {
                ecg_synth::Error::Geometry(format!(
                    "record {r} needs {k} probability segments, only {} rows remain",
                    prob.rows.len().saturating_sub(next_row)
                ))
            })?;
            next_row += k;
            postprocess::detect_from_segments(segs, record, fs, &params)?
        } else {
            let trace = prob
                .rows
                .get(r)
                .ok_or_else(|| ecg_synth::Error::Geometry(format!("no probability trace for record {r}")))?;
            postprocess::extract_peaks(trace, record, &params)?
        };
        log::info!("record {r}: {:?}", result.diagnostics);
        for (&i, &p) in result.peaks.iter().zip(&result.probabilities) {
            out.push((r.to_string(), i, Some(p)));
        }
    }
    let expected_rows = if a.segmented { next_row } else { ecg.rows.len() };
    if prob.rows.len() != expected_rows {
        return Err(anyhow!(ecg_synth::Error::Geometry(format!(
            "probability file has {} rows, ECG implies {expected_rows}",
            prob.rows.len()
        ))));
    }

    match &a.out {
        Some(path) => io::write_peak_csv(path, &out)?,
        None => {
            println!("record,index,probability");
            for (rec, i, p) in &out {
                println!("{rec},{i},{}", p.unwrap_or(f64::NAN));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RecordScore {
    record: String,
    true_positives: usize,
    false_positives: usize,
    false_negatives: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    format_version: u32,
    tolerance: usize,
    records: usize,
    true_positives: usize,
    false_positives: usize,
    false_negatives: usize,
    /// Scores of the pooled counts.
    pooled: metrics::Scores,
    precision: Aggregate,
    recall: Aggregate,
    f1: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    roc_auc: Option<f64>,
}

fn group_peaks(rows: Vec<(String, usize)>, order: &mut Vec<String>) -> BTreeMap<String, Vec<usize>> {
    let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (rec, idx) in rows {
        if !map.contains_key(&rec) && !order.contains(&rec) {
            order.push(rec.clone());
        }
        map.entry(rec).or_default().push(idx);
    }
    for v in map.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    map
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let mut order = Vec::new();
    let mut truth = group_peaks(io::read_peak_csv(&a.truth)?, &mut order);
    let detected = group_peaks(io::read_peak_csv(&a.detected)?, &mut order);

    if let (Some(ecg_path), Some(window)) = (&a.ecg, a.snap) {
        let ecg = io::read_matrix(ecg_path)?;
        for (rec, idx) in truth.iter_mut() {
            let row: usize = rec
                .parse()
                .ok()
                .filter(|&r: &usize| r < ecg.rows.len())
                .ok_or_else(|| ecg_synth::Error::InvalidParameter {
                    name: "record".into(),
                    reason: format!("`{rec}` is not a row of {}", ecg_path.display()),
                })?;
            *idx = snap_to_max(idx, &ecg.rows[row], window);
        }
    }

    let empty = Vec::new();
    let mut per_record = Vec::with_capacity(order.len());
    for rec in &order {
        let t = truth.get(rec).unwrap_or(&empty);
        let d = detected.get(rec).unwrap_or(&empty);
        let m = metrics::match_peaks(t, d, a.tolerance)?;
        let s = m.scores();
        per_record.push(RecordScore {
            record: rec.clone(),
            true_positives: m.true_positives,
            false_positives: m.false_positives,
            false_negatives: m.false_negatives,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        });
    }
    if per_record.is_empty() {
        return Err(anyhow!(ecg_synth::Error::InvalidParameter {
            name: "records".into(),
            reason: "truth and detection files are both empty".into(),
        }));
    }

    let roc_auc = match (&a.labels, &a.prob) {
        (Some(l), Some(p)) => {
            let labels: Vec<u8> = io::read_matrix(l)?
                .rows
                .into_iter()
                .flatten()
                .map(|v| (v != 0.0) as u8)
                .collect();
            let probs: Vec<f64> = io::read_matrix(p)?.rows.into_iter().flatten().collect();
            Some(metrics::roc_auc(&labels, &probs)?)
        }
        _ => None,
    };

    let sum = |f: fn(&RecordScore) -> usize| per_record.iter().map(f).sum::<usize>();
    let (tp, fp, fn_) = (
        sum(|r| r.true_positives),
        sum(|r| r.false_positives),
        sum(|r| r.false_negatives),
    );
    let agg = |f: fn(&RecordScore) -> f64| metrics::aggregate(&per_record.iter().map(f).collect::<Vec<_>>());
    let report = EvaluationReport {
        format_version: FORMAT_VERSION,
        tolerance: a.tolerance,
        records: per_record.len(),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        pooled: metrics::scores(tp, fp, fn_),
        precision: agg(|r| r.precision)?,
        recall: agg(|r| r.recall)?,
        f1: agg(|r| r.f1)?,
        roc_auc,
    };

    if let Some(path) = &a.out_csv {
        let mut text = String::from("record,true_positives,false_positives,false_negatives,precision,recall,f1\n");
        for r in &per_record {
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.record, r.true_positives, r.false_positives, r.false_negatives, r.precision, r.recall, r.f1
            ));
        }
        write_text(path, &text)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct FitDumpMeta<'a> {
    format_version: u32,
    draw: &'a ParameterDraw,
    t_delay: f64,
    r_indices: &'a [usize],
    rr_intervals: &'a [f64],
    truncated: bool,
}

fn fit_dump(a: FitDumpArgs) -> anyhow::Result<()> {
    let (config, _) = a.space.resolve()?;
    let mut draw = match &a.draw {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str::<ParameterDraw>(&text).map_err(|e| ecg_synth::Error::Format {
                path: path.clone(),
                reason: e.to_string(),
            })?
        }
        None => ParameterDraw::midpoint(&config.space)?,
    };
    if a.steady {
        draw.beta = 0.0;
        draw.gamma_sd = 0.0;
    }
    if a.beats == 0 {
        return Err(anyhow!(ecg_synth::Error::InvalidParameter {
            name: "beats".into(),
            reason: "must be >= 1".into(),
        }));
    }
    let rr = RrModel::new(draw.mu, draw.beta, draw.f_b, draw.gamma_sd).generate(a.beats + 1, a.seed)?;
    let fs = draw.sampling_rate;
    let n_samples = BeatGrid::new(&rr, fs)?.ends[a.beats - 1];
    let clean = synthesize_clean(&draw, &rr, n_samples)?;

    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let mut text = String::from("t,ecg,r\n");
    let mut next_r = clean.r_indices.iter().peekable();
    for (n, v) in clean.samples.iter().enumerate() {
        let is_r = next_r.next_if(|&&r| r == n).is_some();
        text.push_str(&format!("{},{},{}\n", n as f64 / fs, v, is_r as u8));
    }
    write_text(&a.out.join("waveform.csv"), &text)?;
    let meta = FitDumpMeta {
        format_version: FORMAT_VERSION,
        draw: &clean.draw,
        t_delay: clean.t_delay,
        r_indices: &clean.r_indices,
        rr_intervals: &clean.rr.intervals,
        truncated: clean.truncated,
    };
    write_text(
        &a.out.join("params.json"),
        &(serde_json::to_string_pretty(&meta)? + "\n"),
    )
}
