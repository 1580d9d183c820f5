//! Detection scoring: one-to-one peak matching, precision/recall/F1,
//! per-record aggregation and sample-wise ROC-AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default matching tolerance, samples (40 ms at 250 Hz).
pub const DEFAULT_TOLERANCE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(truth, detected)` pairs, ordered by truth index.
    pub pairs: Vec<(usize, usize)>,
    pub tolerance: usize,
}

impl MatchReport {
    /// Signed offsets `detected - truth` of the matched pairs.
    pub fn offsets(&self) -> Vec<i64> {
        self.pairs.iter().map(|&(t, d)| d as i64 - t as i64).collect()
    }

    pub fn scores(&self) -> Scores {
        scores(self.true_positives, self.false_positives, self.false_negatives)
    }
}

/// Greedy nearest-first one-to-one matching within `±tolerance`.
///
/// All admissible pairs are visited by increasing distance (ties by the sum
/// of both indices, then by truth index) and kept when both ends are free.
pub fn match_peaks(truth: &[usize], detected: &[usize], tolerance: usize) -> Result<MatchReport> {
    if truth.windows(2).any(|w| w[1] <= w[0]) || detected.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotIncreasing);
    }
    let mut candidates = Vec::new();
    let mut start = 0;
    for (ti, &t) in truth.iter().enumerate() {
        while start < detected.len() && detected[start] + tolerance < t {
            start += 1;
        }
        for (di, &d) in detected.iter().enumerate().skip(start) {
            if d > t + tolerance {
                break;
            }
            candidates.push((t.abs_diff(d), t + d, ti, di));
        }
    }
    candidates.sort_unstable();
    let mut truth_used = vec![false; truth.len()];
    let mut det_used = vec![false; detected.len()];
    let mut pairs = Vec::new();
    for (_, _, ti, di) in candidates {
        if !truth_used[ti] && !det_used[di] {
            truth_used[ti] = true;
            det_used[di] = true;
            pairs.push((truth[ti], detected[di]));
        }
    }
    pairs.sort_unstable();
    let tp = pairs.len();
    Ok(MatchReport {
        true_positives: tp,
        false_positives: detected.len() - tp,
        false_negatives: truth.len() - tp,
        pairs,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts.
///
/// A record with no truth and no detections scores 1 on all three; any other
/// vanishing denominator gives 0.
pub fn scores(tp: usize, fp: usize, fn_: usize) -> Scores {
    if tp == 0 && fp == 0 && fn_ == 0 {
        return Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
    pub n: usize,
}

/// Nearest-rank percentile (`p` in percent) of sorted values.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Mean with 10th and 90th nearest-rank percentiles.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::invalid("records", "at least one record is required"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Aggregate {
        mean: sorted[0] + sorted.iter().map(|v| v - sorted[0]).sum::<f64>() / values.len() as f64,
        p10: nearest_rank(&sorted, 10.0),
        p90: nearest_rank(&sorted, 90.0),
        n: values.len(),
    })
}

/// Rank-based ROC-AUC (Mann–Whitney U); ties count one half.
pub fn roc_auc(labels: &[u8], probabilities: &[f64]) -> Result<f64> {
    if labels.len() != probabilities.len() {
        return Err(Error::Geometry(format!(
            "{} labels vs {} probabilities",
            labels.len(),
            probabilities.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc("both classes must be present"));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]));
    // Sum of average ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probabilities[order[j + 1]] == probabilities[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] != 0).count();
        rank_sum += avg_rank * pos as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_empty_detection() {
        let truth = [10, 200, 400];
        let r = match_peaks(&truth, &truth, 10).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (3, 0, 0));
        assert_eq!(r.scores().f1, 1.0);
        let r = match_peaks(&truth, &[], 10).unwrap();
        assert_eq!(r.false_negatives, 3);
        assert_eq!(r.scores().f1, 0.0);
    }

    #[test]
    fn hand_matched_case() {
        let r = match_peaks(&[100, 300], &[105, 600], 10).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (1, 1, 1));
        assert_eq!(r.pairs, vec![(100, 105)]);
        assert_abs_diff_eq!(r.scores().f1, 0.5);
    }

    #[test]
    fn nearest_pair_wins() {
        let r = match_peaks(&[100, 108], &[106], 10).unwrap();
        assert_eq!(r.pairs, vec![(108, 106)]);
    }

    #[test]
    fn score_conventions() {
        assert_eq!(
            scores(0, 0, 0),
            Scores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        let s = scores(0, 3, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = scores(96, 2, 4);
        assert_abs_diff_eq!(s.precision, 96.0 / 98.0);
        assert_abs_diff_eq!(s.recall, 0.96);
        assert_abs_diff_eq!(s.precision, 0.980, epsilon = 5e-4);
        assert_abs_diff_eq!(s.f1, 0.970, epsilon = 5e-4);
    }

    #[test]
    fn afib_row_is_a_per_record_mean() {
        // The reported F1 (0.968) is below the harmonic mean of the reported
        // precision and recall, as happens when per-record scores are averaged.
        let pooled = 2.0 * 0.985 * 0.960 / (0.985 + 0.960);
        assert_abs_diff_eq!(pooled, 0.9723, epsilon = 1e-4);
        assert!(pooled > 0.968);
        let per_record = [scores(40, 0, 0), scores(30, 2, 8)];
        let mean = |f: fn(&Scores) -> f64| per_record.iter().map(f).sum::<f64>() / 2.0;
        let (p, r, f) = (mean(|s| s.precision), mean(|s| s.recall), mean(|s| s.f1));
        assert!(f < 2.0 * p * r / (p + r));
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[0.7; 5]).unwrap();
        assert_eq!((a.mean, a.p10, a.p90), (0.7, 0.7, 0.7));
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let a = aggregate(&grid).unwrap();
        assert_abs_diff_eq!(a.mean, 0.5, epsilon = 1e-15);
        assert_eq!((a.p10, a.p90), (0.1, 0.9));
        let a = aggregate(&[0.3]).unwrap();
        assert_eq!((a.mean, a.p10, a.p90), (0.3, 0.3, 0.3));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_abs_diff_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_abs_diff_eq!(roc_auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[1, 1], &[0.2, 0.3]), Err(Error::UndefinedAuc(_))));
    }

    #[test]
    fn auc_chance_level() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let probs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        assert!((roc_auc(&labels, &probs).unwrap() - 0.5).abs() < 0.02);
    }

    fn increasing(max: usize) -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::btree_set(0..max, 0..40).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn swap_symmetry(t in increasing(2000), d in increasing(2000), tol in 0usize..30) {
            let a = match_peaks(&t, &d, tol).unwrap();
            let b = match_peaks(&d, &t, tol).unwrap();
            prop_assert_eq!(a.true_positives, b.true_positives);
            prop_assert_eq!(a.false_positives, b.false_negatives);
            prop_assert_eq!(a.false_negatives, b.false_positives);
            prop_assert_eq!(a.true_positives + a.false_negatives, t.len());
            prop_assert_eq!(a.true_positives + a.false_positives, d.len());
        }

        #[test]
        fn shift_invariance(t in increasing(2000), d in increasing(2000), shift in 0usize..5000) {
            let a = match_peaks(&t, &d, 10).unwrap();
            let ts: Vec<usize> = t.iter().map(|x| x + shift).collect();
            let ds: Vec<usize> = d.iter().map(|x| x + shift).collect();
            let b = match_peaks(&ts, &ds, 10).unwrap();
            prop_assert_eq!(a.scores(), b.scores());
        }

        #[test]
        fn auc_monotone_invariance(pairs in proptest::collection::vec((0u8..2, 0.0f64..1.0), 2..200)) {
            let labels: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let probs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let warped: Vec<f64> = probs.iter().map(|&p| (3.0 * p).exp() - 7.0).collect();
            let a = roc_auc(&labels, &probs).unwrap();
            let b = roc_auc(&labels, &warped).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
