//! Matrix file codecs shared by datasets, probability traces and artefact
//! records.
//!
//! Two encodings:
//!
//! * raw little-endian `f32` (or `u8`) rows, concatenated, with a JSON
//!   sidecar of the same stem holding the shape and sampling rate;
//! * CSV, one row per line, no header. Rows may differ in length.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    F32,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Format::F32),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn extension(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::U8 => "u8",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// JSON sidecar describing a binary matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub dtype: Dtype,
    /// Data file name, relative to the sidecar.
    pub data: String,
    pub rows: usize,
    /// Row lengths, when rows are not all the same length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_lengths: Option<Vec<usize>>,
    /// Common row length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_rate: Option<f64>,
}

impl Sidecar {
    fn lengths(&self, path: &Path) -> Result<Vec<usize>> {
        match (&self.row_lengths, self.cols) {
            (Some(l), _) if l.len() == self.rows => Ok(l.clone()),
            (Some(_), _) => Err(Error::format(path, "row_lengths does not match rows")),
            (None, Some(c)) => Ok(vec![c; self.rows]),
            (None, None) => Err(Error::format(path, "sidecar needs cols or row_lengths")),
        }
    }
}

fn sidecar_for(data: &Path) -> PathBuf {
    data.with_extension("json")
}

fn shape_of<T>(rows: &[Vec<T>]) -> (Option<usize>, Option<Vec<usize>>) {
    let first = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().all(|r| r.len() == first) {
        (Some(first), None)
    } else {
        (None, Some(rows.iter().map(|r| r.len()).collect()))
    }
}

fn write_sidecar(
    data: &Path,
    dtype: Dtype,
    rows: usize,
    shape: (Option<usize>, Option<Vec<usize>>),
    fs: Option<f64>,
) -> Result<()> {
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        dtype,
        data: data
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        rows,
        cols: shape.0,
        row_lengths: shape.1,
        sampling_rate: fs,
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    let path = sidecar_for(data);
    fs::write(&path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Writes `rows` as `<stem>.f32` + sidecar, or `<stem>.csv`. Returns the
/// path of the data file.
pub fn write_f32_matrix(stem: &Path, rows: &[Vec<f32>], format: Format, fs: Option<f64>) -> Result<PathBuf> {
    match format {
        Format::F32 => {
            let path = stem.with_extension(Dtype::F32.extension());
            let mut w = create(&path)?;
            for row in rows {
                for v in row {
                    w.write_all(&v.to_le_bytes())
                        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                }
            }
            w.flush()
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            write_sidecar(&path, Dtype::F32, rows.len(), shape_of(rows), fs)?;
            Ok(path)
        }
        Format::Csv => {
            let path = stem.with_extension("csv");
            write_csv(&path, rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()))?;
            Ok(path)
        }
    }
}

/// Writes binary label rows as `<stem>.u8` + sidecar, or `<stem>.csv`.
pub fn write_u8_matrix(stem: &Path, rows: &[Vec<u8>], format: Format) -> Result<PathBuf> {
    match format {
        Format::F32 => {
            let path = stem.with_extension(Dtype::U8.extension());
            let mut w = create(&path)?;
            for row in rows {
                w.write_all(row)
                    .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            }
            w.flush()
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            write_sidecar(&path, Dtype::U8, rows.len(), shape_of(rows), None)?;
            Ok(path)
        }
        Format::Csv => {
            let path = stem.with_extension("csv");
            write_csv(&path, rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()))?;
            Ok(path)
        }
    }
}

fn write_csv(path: &Path, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(format!("csv {}", path.display()), io),
            other => Error::format(path, format!("{other:?}")),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

/// A matrix read back from disk, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: Vec<Vec<f64>>,
    pub sampling_rate: Option<f64>,
}

/// Reads a matrix given its data file (`.f32`, `.u8`, `.csv`) or its JSON
/// sidecar.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "csv" => {
            let rows = read_csv(path)?;
            let sidecar = sidecar_for(path);
            let sampling_rate = if sidecar.exists() {
                read_sidecar(&sidecar)?.sampling_rate
            } else {
                None
            };
            Ok(Matrix { rows, sampling_rate })
        }
        "json" => {
            let sidecar = read_sidecar(path)?;
            let data = path.parent().unwrap_or(Path::new(".")).join(&sidecar.data);
            read_binary(&data, &sidecar)
        }
        "f32" | "u8" => {
            let sidecar = read_sidecar(&sidecar_for(path))?;
            read_binary(path, &sidecar)
        }
        _ => Err(Error::format(path, "expected a .f32, .u8, .csv or .json file")),
    }
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported format_version {}", sidecar.format_version),
        ));
    }
    Ok(sidecar)
}

fn read_binary(path: &Path, sidecar: &Sidecar) -> Result<Matrix> {
    let lengths = sidecar.lengths(path)?;
    let mut bytes = Vec::new();
    File::open(path)
        .map(BufReader::new)
        .and_then(|mut r| r.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let width = sidecar.dtype.width();
    let expected: usize = lengths.iter().sum::<usize>() * width;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes from sidecar shape, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = match sidecar.dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::U8 => bytes.iter().map(|&b| b as f64).collect(),
    };
    let mut rows = Vec::with_capacity(lengths.len());
    let mut at = 0;
    for len in lengths {
        rows.push(values[at..at + len].to_vec());
        at += len;
    }
    Ok(Matrix {
        rows,
        sampling_rate: sidecar.sampling_rate,
    })
}

/// Blank lines are empty rows, so ragged files keep their row numbering.
fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rows = Vec::new();
    for (line, record) in text.lines().enumerate() {
        let mut row = Vec::new();
        for field in record
            .split(',')
            .map(|f| f.trim().trim_matches('"'))
            .filter(|f| !f.is_empty())
        {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: not a number: {field:?}", line + 1)))?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a peak list. Either a CSV with a `record,index[,...]` header, or
/// one line of comma-separated indices per record (the dataset's
/// `r_indices.csv`), where line `i` is record `i` and blank lines are records
/// without peaks. Returns `(record, index)` pairs in file order.
pub fn read_peak_csv(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let first = text.lines().next().unwrap_or("");
    if !first.split(',').any(|f| f.trim() == "record") {
        return read_index_rows(path, &text);
    }
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (rec_col, idx_col) = match (col("record"), col("index")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::format(path, "expected `record` and `index` columns")),
    };
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let idx: usize = row
            .get(idx_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad index", line + 2)))?;
        out.push((row.get(rec_col).unwrap_or("").to_string(), idx));
    }
    Ok(out)
}

fn read_index_rows(path: &Path, text: &str) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    for (line, row) in text.lines().enumerate() {
        for field in row
            .split(',')
            .map(|f| f.trim().trim_matches('"'))
            .filter(|f| !f.is_empty())
        {
            // f32 matrices write whole numbers as `12` or `12.0`
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: not an index: {field:?}", line + 1)))?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::format(
                    path,
                    format!("line {}: not an index: {field:?}", line + 1),
                ));
            }
            out.push((line.to_string(), v as usize));
        }
    }
    Ok(out)
}

/// Writes `record,index[,probability]` rows with a header.
pub fn write_peak_csv(path: &Path, rows: &[(String, usize, Option<f64>)]) -> Result<()> {
    let with_prob = rows.iter().any(|r| r.2.is_some());
    let mut w = create(path)?;
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    if with_prob {
        writeln!(w, "record,index,probability").map_err(io)?;
    } else {
        writeln!(w, "record,index").map_err(io)?;
    }
    for (rec, idx, p) in rows {
        match (with_prob, p) {
            (true, Some(p)) => writeln!(w, "{rec},{idx},{p}"),
            (true, None) => writeln!(w, "{rec},{idx},"),
            _ => writeln!(w, "{rec},{idx}"),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
