//! Python bindings. Arrays cross the boundary as lists of floats; composite
//! results come back as dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ecg_synth::artefact::ArtefactBank;
use ecg_synth::dataset::{self, Provenance};
use ecg_synth::param_space::{self, Scaling, Wave};
use ecg_synth::rr::RrSeries;
use ecg_synth::{conditioning, metrics, noise, postprocess, rr, waveform};

fn to_py(e: ecg_synth::Error) -> PyErr {
    match e {
        ecg_synth::Error::Io { .. } => PyOSError::new_err(format!(
            "{e}: {}",
            std::error::Error::source(&e).map(|s| s.to_string()).unwrap_or_default()
        )),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn wave_from_name(name: &str) -> PyResult<Wave> {
    Wave::ALL
        .into_iter()
        .find(|w| w.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown wave {name:?}; expected one of p, q, r, s, t")))
}

/// Parameter ranges plus per-group scaling coefficients.
#[pyclass(name = "ParameterSpace", from_py_object)]
#[derive(Clone)]
struct PySpace {
    inner: param_space::ParameterSpace,
}

#[pymethods]
impl PySpace {
    /// Baseline ranges with every group scaled by `scale`.
    #[new]
    #[pyo3(signature = (scale = 1.0))]
    fn new(scale: f64) -> PyResult<Self> {
        let inner = param_space::default_space().with_scaling(Scaling::uniform(scale));
        inner.validate().map_err(to_py)?;
        Ok(PySpace { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = param_space::ParameterSpace::from_json(text).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(PySpace { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Copy with new coefficients; unspecified groups keep their value.
    #[pyo3(signature = (rr = None, wave = None, fiducial = None, noise = None, scale_r = None))]
    fn with_scaling(
        &self,
        rr: Option<f64>,
        wave: Option<f64>,
        fiducial: Option<f64>,
        noise: Option<f64>,
        scale_r: Option<bool>,
    ) -> PyResult<Self> {
        let mut s = self.inner.scaling;
        s.rr = rr.unwrap_or(s.rr);
        s.wave = wave.unwrap_or(s.wave);
        s.fiducial = fiducial.unwrap_or(s.fiducial);
        s.noise = noise.unwrap_or(s.noise);
        s.scale_r = scale_r.unwrap_or(s.scale_r);
        let inner = self.inner.with_scaling(s);
        inner.validate().map_err(to_py)?;
        Ok(PySpace { inner })
    }

    /// `{"p.amplitude": (low, high), ..., "mu": ..., "rho": ...}` after scaling.
    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.scaled().map_err(to_py)?;
        let d = PyDict::new(py);
        for w in Wave::ALL {
            let b = s.wave(w);
            for (field, v) in [
                ("amplitude", b.amplitude),
                ("width", b.width),
                ("delay", b.delay),
                ("asymmetry", b.asymmetry),
            ] {
                d.set_item(format!("{}.{field}", w.name()), (v.low, v.high))?;
            }
        }
        for (name, v) in [("mu", s.mu), ("sigma", s.sigma), ("alpha", s.alpha), ("rho", s.rho)] {
            d.set_item(name, (v.low, v.high))?;
        }
        Ok(d)
    }

    fn sample(&self, seed: u64) -> PyResult<PyDraw> {
        param_space::sample_draw(&self.inner, seed)
            .map(|inner| PyDraw { inner })
            .map_err(to_py)
    }

    fn midpoint(&self) -> PyResult<PyDraw> {
        param_space::ParameterDraw::midpoint(&self.inner)
            .map(|inner| PyDraw { inner })
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let s = self.inner.scaling;
        format!(
            "ParameterSpace(rr={}, wave={}, fiducial={}, noise={}, scale_r={})",
            s.rr, s.wave, s.fiducial, s.noise, s.scale_r
        )
    }
}

/// One concrete parameter draw.
#[pyclass(name = "ParameterDraw", from_py_object)]
#[derive(Clone)]
struct PyDraw {
    inner: param_space::ParameterDraw,
}

#[pymethods]
impl PyDraw {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| PyDraw { inner })
            .map_err(json_err)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("draw serializes")
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[getter]
    fn sampling_rate(&self) -> f64 {
        self.inner.sampling_rate
    }

    /// `{"amplitude", "width", "delay", "asymmetry"}` of one wave.
    fn wave<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyDict>> {
        let w = self.inner.wave(wave_from_name(name)?);
        let d = PyDict::new(py);
        d.set_item("amplitude", w.amplitude)?;
        d.set_item("width", w.width)?;
        d.set_item("delay", w.delay)?;
        d.set_item("asymmetry", w.asymmetry)?;
        Ok(d)
    }

    /// Copy with every wave silenced except `keep`.
    fn isolate(&self, keep: Vec<String>) -> PyResult<Self> {
        let waves = keep.iter().map(|n| wave_from_name(n)).collect::<PyResult<Vec<_>>>()?;
        Ok(PyDraw {
            inner: self.inner.isolate(&waves),
        })
    }

    fn __repr__(&self) -> String {
        format!("ParameterDraw(mu={:.4}, seed={})", self.inner.mu, self.inner.seed)
    }
}

/// Everything that determines a dataset.
#[pyclass(name = "GenerationConfig")]
struct PyConfig {
    inner: dataset::GenerationConfig,
    bank: Option<ArtefactBank>,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (space, master_seed, segment_length = 1000, margin = 500, artefact_bank = None, zero_phase = false))]
    fn new(
        space: PySpace,
        master_seed: u64,
        segment_length: usize,
        margin: usize,
        artefact_bank: Option<PathBuf>,
        zero_phase: bool,
    ) -> PyResult<Self> {
        let mut inner = dataset::GenerationConfig::new(space.inner, master_seed);
        inner.segment_length = segment_length;
        inner.margin = margin;
        inner.zero_phase = zero_phase;
        if let Some(dir) = artefact_bank {
            inner.augment = true;
            inner.artefact_bank = Some(dir);
        }
        inner.validate().map_err(to_py)?;
        let bank = inner.load_bank().map_err(to_py)?;
        Ok(PyConfig { inner, bank })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("config serializes")
    }

    /// Example `index`: `signal`, `labels`, `r_indices`, `seed`,
    /// `window_offset`, `draw` and `flags`.
    fn example<'py>(&self, py: Python<'py>, index: u64) -> PyResult<Bound<'py, PyDict>> {
        let e = dataset::next_example(&self.inner, self.bank.as_ref(), index).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("signal", e.signal)?;
        d.set_item("labels", e.labels.into_iter().map(u32::from).collect::<Vec<_>>())?;
        d.set_item("r_indices", e.r_indices)?;
        if let Provenance::Synthetic {
            seed,
            window_offset,
            draw,
            ..
        } = e.provenance
        {
            d.set_item("seed", seed)?;
            d.set_item("window_offset", window_offset)?;
            d.set_item("draw", PyDraw { inner: draw })?;
        }
        let flags = PyDict::new(py);
        flags.set_item("rr_clamped", e.flags.rr_clamped)?;
        flags.set_item("mu_raised", e.flags.mu_raised)?;
        flags.set_item("wave_truncated", e.flags.wave_truncated)?;
        flags.set_item("degenerate", e.flags.degenerate)?;
        d.set_item("flags", flags)?;
        Ok(d)
    }

    /// Writes examples `0..n` to `out`; returns the manifest as JSON.
    fn export(&self, n: usize, out: PathBuf) -> PyResult<String> {
        let m = dataset::export_dataset(&self.inner, n, &out).map_err(to_py)?;
        Ok(serde_json::to_string_pretty(&m).expect("manifest serializes"))
    }
}

/// Regenerates a dataset from its manifest; returns the manifest as JSON.
#[pyfunction]
fn replay_manifest(manifest: PathBuf, out: PathBuf) -> PyResult<String> {
    let m = dataset::replay_manifest(&manifest, &out).map_err(to_py)?;
    Ok(serde_json::to_string_pretty(&m).expect("manifest serializes"))
}

/// Returns `(intervals, times, clamped)`.
#[pyfunction]
#[pyo3(signature = (mu, beta, f_b, gamma_sd, n_beats, seed = 0))]
fn generate_rr(
    mu: f64,
    beta: f64,
    f_b: f64,
    gamma_sd: f64,
    n_beats: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, bool)> {
    let s = rr::generate_rr(mu, beta, f_b, gamma_sd, n_beats, seed).map_err(to_py)?;
    Ok((s.intervals, s.times, s.clamped))
}

/// Clean ECG for a draw and a list of RR intervals (seconds).
#[pyfunction]
fn synthesize_clean<'py>(
    py: Python<'py>,
    draw: &PyDraw,
    intervals: Vec<f64>,
    n_samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mut times = Vec::with_capacity(intervals.len());
    let mut t = 0.0;
    for &x in &intervals {
        times.push(t);
        t += x;
    }
    let series = RrSeries {
        intervals,
        times,
        clamped: false,
    };
    let c = waveform::synthesize_clean(&draw.inner, &series, n_samples).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("samples", c.samples)?;
    d.set_item("r_indices", c.r_indices)?;
    d.set_item("t_delay", c.t_delay)?;
    d.set_item("truncated", c.truncated)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (rho, alpha, sigma2, n_samples, fs = 250.0, seed = 0))]
fn generate_noise(rho: f64, alpha: f64, sigma2: f64, n_samples: usize, fs: f64, seed: u64) -> PyResult<Vec<f64>> {
    let spec = noise::NoiseSpec {
        rho,
        alpha,
        sigma2,
        n_samples,
        fs,
    };
    noise::generate_noise(&spec, seed).map_err(to_py)
}

/// One-sided periodogram, bins `0..=n/2`.
#[pyfunction]
fn periodogram(x: Vec<f64>) -> Vec<f64> {
    noise::periodogram(&x)
}

#[pyfunction]
fn make_labels(r_indices: Vec<usize>, length: usize) -> PyResult<Vec<u32>> {
    let labels = conditioning::make_labels(&r_indices, length).map_err(to_py)?;
    Ok(labels.into_iter().map(u32::from).collect())
}

#[pyfunction]
#[pyo3(signature = (signal, fs = 250.0, zero_phase = false))]
fn bandpass(signal: Vec<f64>, fs: f64, zero_phase: bool) -> PyResult<Vec<f64>> {
    if zero_phase {
        conditioning::bandpass_zero_phase(&signal, fs)
    } else {
        conditioning::bandpass(&signal, fs)
    }
    .map_err(to_py)
}

/// Returns `(samples, degenerate)`.
#[pyfunction]
fn normalize(signal: Vec<f64>) -> (Vec<f64>, bool) {
    let n = conditioning::normalize(&signal);
    (n.samples, n.degenerate)
}

/// Normalized segment plus a random artefact from the bank in `bank_dir`.
#[pyfunction]
fn augment(segment: Vec<f64>, bank_dir: PathBuf, seed: u64) -> PyResult<Vec<f64>> {
    let bank = ArtefactBank::load(&bank_dir).map_err(to_py)?;
    ecg_synth::artefact::augment(&segment, &bank, seed).map_err(to_py)
}

/// Zero-padded 1000-sample model inputs at stride 250.
#[pyfunction]
fn split_segments(record: Vec<f64>) -> Vec<Vec<f64>> {
    postprocess::split_segments(&record)
}

#[pyfunction]
#[pyo3(signature = (segments, record_len, fs = 250.0))]
fn windowed_average(segments: Vec<Vec<f64>>, record_len: usize, fs: f64) -> PyResult<Vec<f64>> {
    postprocess::windowed_average(&segments, record_len, fs)
        .map(|t| t.values)
        .map_err(to_py)
}

/// `{"peaks", "probabilities", "diagnostics"}`.
#[pyfunction]
#[pyo3(signature = (avg, ecg, threshold = 0.05, min_distance = 75))]
fn extract_peaks<'py>(
    py: Python<'py>,
    avg: Vec<f64>,
    ecg: Vec<f64>,
    threshold: f64,
    min_distance: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let params = postprocess::PeakParams {
        threshold,
        min_distance,
        ..Default::default()
    };
    let r = postprocess::extract_peaks(&avg, &ecg, &params).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("peaks", r.peaks)?;
    d.set_item("probabilities", r.probabilities)?;
    let diag = PyDict::new(py);
    diag.set_item("above_threshold", r.diagnostics.above_threshold)?;
    diag.set_item("voted", r.diagnostics.voted)?;
    diag.set_item("isolated", r.diagnostics.isolated)?;
    diag.set_item("approved", r.diagnostics.approved)?;
    d.set_item("diagnostics", diag)?;
    Ok(d)
}

fn scores_dict<'py>(py: Python<'py>, s: metrics::Scores) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("precision", s.precision)?;
    d.set_item("recall", s.recall)?;
    d.set_item("f1", s.f1)?;
    Ok(d)
}

/// Counts, matched pairs and scores.
#[pyfunction]
#[pyo3(signature = (truth, detected, tolerance = metrics::DEFAULT_TOLERANCE))]
fn match_peaks<'py>(
    py: Python<'py>,
    truth: Vec<usize>,
    detected: Vec<usize>,
    tolerance: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::match_peaks(&truth, &detected, tolerance).map_err(to_py)?;
    let d = scores_dict(py, m.scores())?;
    d.set_item("true_positives", m.true_positives)?;
    d.set_item("false_positives", m.false_positives)?;
    d.set_item("false_negatives", m.false_negatives)?;
    d.set_item("pairs", m.pairs)?;
    Ok(d)
}

#[pyfunction]
fn scores<'py>(py: Python<'py>, tp: usize, fp: usize, fn_: usize) -> PyResult<Bound<'py, PyDict>> {
    scores_dict(py, metrics::scores(tp, fp, fn_))
}

/// `{"mean", "p10", "p90", "n"}` with nearest-rank percentiles.
#[pyfunction]
fn aggregate<'py>(py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let a = metrics::aggregate(&values).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", a.mean)?;
    d.set_item("p10", a.p10)?;
    d.set_item("p90", a.p90)?;
    d.set_item("n", a.n)?;
    Ok(d)
}

#[pyfunction]
fn roc_auc(labels: Vec<u8>, probabilities: Vec<f64>) -> PyResult<f64> {
    metrics::roc_auc(&labels, &probabilities).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "ecg_synth")]
fn ecg_synth_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("FORMAT_VERSION", ecg_synth::io::FORMAT_VERSION)?;
    m.add_class::<PySpace>()?;
    m.add_class::<PyDraw>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(replay_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(generate_rr, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_clean, m)?)?;
    m.add_function(wrap_pyfunction!(generate_noise, m)?)?;
    m.add_function(wrap_pyfunction!(periodogram, m)?)?;
    m.add_function(wrap_pyfunction!(make_labels, m)?)?;
    m.add_function(wrap_pyfunction!(bandpass, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(augment, m)?)?;
    m.add_function(wrap_pyfunction!(split_segments, m)?)?;
    m.add_function(wrap_pyfunction!(windowed_average, m)?)?;
    m.add_function(wrap_pyfunction!(extract_peaks, m)?)?;
    m.add_function(wrap_pyfunction!(match_peaks, m)?)?;
    m.add_function(wrap_pyfunction!(scores, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    Ok(())
}
