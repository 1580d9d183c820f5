//! Turns per-sample r-wave probabilities into peak indices.
//!
//! 1. Records are cut into 1000-sample segments with a 250-sample stride and
//!    the overlapping segment predictions are averaged per sample.
//! 2. Samples with averaged probability at or above the threshold are
//!    candidates; each is moved to the ECG maximum in `[i - 5, i + 4]`.
//! 3. Indices receiving at least five moved candidates are r-wave candidates.
//! 4. Candidates without another candidate closer than the minimum distance
//!    are approved outright. The rest are visited by decreasing probability
//!    and approved when no approved peak is closer than the minimum distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SEGMENT_LENGTH: usize = 1000;
pub const SEGMENT_STRIDE: usize = 250;

/// Start offsets of the segments covering a record of `len` samples.
///
/// Segments advance by `stride` while each still adds samples not covered by
/// the previous one; the last may run past the end and is zero-padded.
pub fn segment_offsets(len: usize, window: usize, stride: usize) -> Vec<usize> {
    let overlap = window.saturating_sub(stride);
    let mut offsets = vec![0];
    let mut k = 1;
    while k * stride + overlap < len {
        offsets.push(k * stride);
        k += 1;
    }
    offsets
}

/// Cuts a record into zero-padded model-input segments.
pub fn split_segments(record: &[f64]) -> Vec<Vec<f64>> {
    segment_offsets(record.len(), SEGMENT_LENGTH, SEGMENT_STRIDE)
        .into_iter()
        .map(|off| {
            let mut seg = vec![0.0; SEGMENT_LENGTH];
            let end = (off + SEGMENT_LENGTH).min(record.len());
            seg[..end - off].copy_from_slice(&record[off..end]);
            seg
        })
        .collect()
}

/// Averaged per-sample probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTrace {
    pub values: Vec<f64>,
    pub fs: f64,
}

/// Averages overlapping segment predictions back onto the record.
///
/// `segments` must follow [`segment_offsets`] for `record_len`. Each may be
/// full length (zero-padded input) or already trimmed to the record.
pub fn windowed_average(segments: &[Vec<f64>], record_len: usize, fs: f64) -> Result<ProbabilityTrace> {
    let offsets = segment_offsets(record_len, SEGMENT_LENGTH, SEGMENT_STRIDE);
    if segments.len() != offsets.len() {
        return Err(Error::Geometry(format!(
            "record of {record_len} samples needs {} segments, got {}",
            offsets.len(),
            segments.len()
        )));
    }
    let mut sum = vec![0.0; record_len];
    let mut count = vec![0u32; record_len];
    for (seg, &off) in segments.iter().zip(&offsets) {
        let covered = (off + SEGMENT_LENGTH).min(record_len) - off;
        if seg.len() != SEGMENT_LENGTH && seg.len() != covered {
            return Err(Error::Geometry(format!(
                "segment at offset {off} has {} samples, expected {SEGMENT_LENGTH} or {covered}",
                seg.len()
            )));
        }
        for (j, &p) in seg[..covered].iter().enumerate() {
            sum[off + j] += p;
            count[off + j] += 1;
        }
    }
    let values = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok(ProbabilityTrace { values, fs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub threshold: f64,
    /// Samples; approved peaks are never closer than this.
    pub min_distance: usize,
    /// Samples before a candidate included in its max search.
    pub search_before: usize,
    /// Samples after a candidate included in its max search.
    pub search_after: usize,
    pub min_votes: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            threshold: 0.05,
            min_distance: 75,
            search_before: 5,
            search_after: 4,
            min_votes: 5,
        }
    }
}

/// Candidate counts after each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub above_threshold: usize,
    pub voted: usize,
    pub isolated: usize,
    pub approved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Strictly increasing.
    pub peaks: Vec<usize>,
    /// Mean averaged probability over the samples that voted for each peak.
    pub probabilities: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Index of the first maximum of `ecg` in `[i - before, i + after]`.
fn local_argmax(ecg: &[f64], i: usize, before: usize, after: usize) -> usize {
    let lo = i.saturating_sub(before);
    let hi = (i + after).min(ecg.len() - 1);
    let mut best = lo;
    for j in lo + 1..=hi {
        if ecg[j] > ecg[best] {
            best = j;
        }
    }
    best
}

pub fn extract_peaks(avg: &[f64], ecg: &[f64], params: &PeakParams) -> Result<DetectionResult> {
    if avg.len() != ecg.len() {
        return Err(Error::Geometry(format!(
            "probability trace has {} samples, ECG has {}",
            avg.len(),
            ecg.len()
        )));
    }
    let mut diagnostics = Diagnostics::default();
    // target index -> (votes, probability sum over voters)
    let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (i, &p) in avg.iter().enumerate() {
        if p >= params.threshold {
            diagnostics.above_threshold += 1;
            let target = local_argmax(ecg, i, params.search_before, params.search_after);
            let e = votes.entry(target).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += p;
        }
    }
    let candidates: Vec<(usize, f64)> = votes
        .into_iter()
        .filter(|(_, (n, _))| *n >= params.min_votes)
        .map(|(idx, (n, s))| (idx, s / n as f64))
        .collect();
    diagnostics.voted = candidates.len();

    let d = params.min_distance;
    let close = |a: usize, b: usize| a.abs_diff(b) < d;
    let mut approved: Vec<(usize, f64)> = Vec::new();
    let mut contested: Vec<(usize, f64)> = Vec::new();
    for (k, &(idx, p)) in candidates.iter().enumerate() {
        // Candidates are sorted, so only the immediate neighbours matter.
        let near_prev = k > 0 && close(candidates[k - 1].0, idx);
        let near_next = k + 1 < candidates.len() && close(candidates[k + 1].0, idx);
        if near_prev || near_next {
            contested.push((idx, p));
        } else {
            approved.push((idx, p));
        }
    }
    diagnostics.isolated = approved.len();

    contested.sort_by(|a, b| avg[b.0].total_cmp(&avg[a.0]).then(a.0.cmp(&b.0)));
    for (idx, p) in contested {
        if approved.iter().all(|&(a, _)| !close(a, idx)) {
            approved.push((idx, p));
        }
    }
    approved.sort_by_key(|&(i, _)| i);
    diagnostics.approved = approved.len();
    Ok(DetectionResult {
        peaks: approved.iter().map(|&(i, _)| i).collect(),
        probabilities: approved.iter().map(|&(_, p)| p).collect(),
        diagnostics,
    })
}

/// Segment predictions → averaged trace → peaks.
pub fn detect_from_segments(
    segments: &[Vec<f64>],
    ecg: &[f64],
    fs: f64,
    params: &PeakParams,
) -> Result<DetectionResult> {
    let trace = windowed_average(segments, ecg.len(), fs)?;
    extract_peaks(&trace.values, ecg, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn offsets_for_2000_samples() {
        assert_eq!(segment_offsets(2000, 1000, 250), vec![0, 250, 500, 750, 1000]);
        assert_eq!(segment_offsets(2100, 1000, 250), vec![0, 250, 500, 750, 1000, 1250]);
        assert_eq!(segment_offsets(1000, 1000, 250), vec![0]);
        assert_eq!(segment_offsets(400, 1000, 250), vec![0]);
    }

    #[test]
    fn interior_average_and_single_cover_edge() {
        let len = 2000;
        let offsets = segment_offsets(len, 1000, 250);
        let vals = [0.1, 0.2, 0.3, 0.4, 0.9];
        let segs: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v; 1000]).collect();
        let t = windowed_average(&segs, len, 250.0).unwrap();
        // Sample 800 is covered by the segments at 0, 250, 500 and 750.
        assert!(offsets.iter().filter(|&&o| o <= 800 && 800 < o + 1000).count() == 4);
        assert_abs_diff_eq!(t.values[800], 0.25, epsilon = 1e-15);
        assert!(t.values[..250].iter().all(|&v| v == 0.1));
    }

    #[test]
    fn geometry_checked() {
        assert!(matches!(
            windowed_average(&[vec![0.0; 1000]], 2000, 250.0),
            Err(Error::Geometry(_))
        ));
        let segs = vec![vec![0.0; 999]; 5];
        assert!(windowed_average(&segs, 2000, 250.0).is_err());
        // Trimmed tail segment accepted.
        let mut segs = vec![vec![0.0; 1000]; 6];
        segs[5] = vec![0.0; 850];
        assert!(windowed_average(&segs, 2100, 250.0).is_ok());
    }

    #[test]
    fn split_pads_tail() {
        let rec: Vec<f64> = (0..2100).map(|i| i as f64).collect();
        let segs = split_segments(&rec);
        assert_eq!(segs.len(), 6);
        assert_eq!(segs[5][0], 1250.0);
        assert_eq!(segs[5][849], 2099.0);
        assert_eq!(segs[5][850], 0.0);
    }

    #[test]
    fn zero_probabilities_no_peaks() {
        let r = extract_peaks(&[0.0; 500], &[0.0; 500], &PeakParams::default()).unwrap();
        assert!(r.peaks.is_empty());
    }

    #[test]
    fn plateau_over_one_max_gives_one_peak() {
        let mut ecg = vec![0.0; 300];
        ecg[150] = 1.0;
        let mut avg = vec![0.0; 300];
        for p in &mut avg[147..154] {
            *p = 0.5;
        }
        let r = extract_peaks(&avg, &ecg, &PeakParams::default()).unwrap();
        assert_eq!(r.peaks, vec![150]);
        assert_eq!(r.diagnostics.above_threshold, 7);
    }

    #[test]
    fn close_clusters_keep_the_more_probable() {
        let mut ecg = vec![0.0; 400];
        ecg[100] = 1.0;
        ecg[140] = 0.8;
        let mut avg = vec![0.0; 400];
        for i in 98..103 {
            avg[i] = 0.6;
        }
        for i in 138..143 {
            avg[i] = 0.9;
        }
        let r = extract_peaks(&avg, &ecg, &PeakParams::default()).unwrap();
        assert_eq!(r.peaks, vec![140]);
        assert_abs_diff_eq!(r.probabilities[0], 0.9);
    }

    #[test]
    fn four_votes_are_not_enough() {
        let mut ecg = vec![0.0; 100];
        ecg[50] = 1.0;
        let mut avg = vec![0.0; 100];
        for p in &mut avg[48..52] {
            *p = 1.0;
        }
        assert!(extract_peaks(&avg, &ecg, &PeakParams::default())
            .unwrap()
            .peaks
            .is_empty());
    }

    #[test]
    fn search_window_is_asymmetric() {
        // A max five samples before is reached, five after is not.
        let mut ecg = vec![0.0; 100];
        ecg[45] = 1.0;
        assert_eq!(local_argmax(&ecg, 50, 5, 4), 45);
        let mut ecg = vec![0.0; 100];
        ecg[55] = 1.0;
        assert_ne!(local_argmax(&ecg, 50, 5, 4), 55);
        ecg[54] = 1.0;
        assert_eq!(local_argmax(&ecg, 50, 5, 4), 54);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(extract_peaks(&[0.0; 10], &[0.0; 11], &PeakParams::default()).is_err());
    }
}
