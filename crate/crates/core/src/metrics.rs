//! Classifier evaluation: accuracy at a cutoff, ROC area, and the
//! Kolmogorov-Smirnov separation statistic, on train and validation splits.

use serde::{Deserialize, Serialize};

use crate::data::{ConfusionCounts, Dataset};
use crate::error::{Error, Result};
use crate::logit::{predict_proba, LogisticModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub accuracy: f64,
    pub auc: f64,
    pub ks: f64,
    pub confusion: ConfusionCounts,
}

/// Accuracy at a cutoff: a row is classified 1 only when its score is
/// strictly greater than the cutoff (ties go to class 0).
pub fn accuracy(scores: &[f64], labels: &[u8], cutoff: f64) -> Result<(f64, ConfusionCounts)> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "accuracy needs equal-length non-empty scores and labels, got {} / {}",
            scores.len(),
            labels.len()
        )));
    }
    let mut counts = ConfusionCounts {
        true_positives: 0,
        true_negatives: 0,
        false_positives: 0,
        false_negatives: 0,
    };
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted = score > cutoff;
        match (predicted, label) {
            (true, 1) => counts.true_positives += 1,
            (false, 0) => counts.true_negatives += 1,
            (true, 0) => counts.false_positives += 1,
            (false, 1) => counts.false_negatives += 1,
            _ => {
                return Err(Error::Metrics(format!(
                    "labels must be 0 or 1, got {label}"
                )))
            }
        }
    }
    let acc =
        (counts.true_positives + counts.true_negatives) as f64 / counts.total() as f64;
    Ok((acc, counts))
}

/// Area under the ROC curve by the trapezoidal rule over distinct score
/// thresholds. Equals the Mann-Whitney concordance probability with ties
/// counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = class_sizes(scores, labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tpr, mut prev_fpr) = (0.0f64, 0.0f64);
    let mut auc = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        // consume every row tied at this score before emitting a ROC point
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            if labels[order[idx]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(auc)
}

/// Kolmogorov-Smirnov statistic: the largest absolute gap between the
/// class-conditional empirical CDFs of the scores, evaluated at every
/// distinct score.
pub fn ks_stat(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = class_sizes(scores, labels)?;
    let mut pos: Vec<f64> = Vec::with_capacity(n_pos as usize);
    let mut neg: Vec<f64> = Vec::with_capacity(n_neg as usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut best = 0.0f64;
    for &x in scores {
        let f_pos = pos.partition_point(|&v| v <= x) as f64 / n_pos as f64;
        let f_neg = neg.partition_point(|&v| v <= x) as f64 / n_neg as f64;
        let gap = (f_neg - f_pos).abs();
        if gap > best {
            best = gap;
        }
    }
    Ok(best)
}

fn class_sizes(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "need equal-length non-empty scores and labels, got {} / {}",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.iter().filter(|&&l| l == 0).count() as u64;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metrics(
            "both classes must be present".to_string(),
        ));
    }
    if n_pos + n_neg != labels.len() as u64 {
        return Err(Error::Metrics("labels must be 0 or 1".to_string()));
    }
    Ok((n_pos, n_neg))
}

/// Computes all metrics for one split at the 0.5 cutoff.
pub fn report_for(
    model: &LogisticModel,
    ds: &Dataset,
    split: impl Into<String>,
) -> Result<MetricsReport> {
    let scores = predict_proba(model, ds)?;
    let labels = ds.target_as_binary()?;
    let (acc, confusion) = accuracy(&scores, &labels, 0.5)?;
    Ok(MetricsReport {
        split: split.into(),
        accuracy: acc,
        auc: roc_auc(&scores, &labels)?,
        ks: ks_stat(&scores, &labels)?,
        confusion,
    })
}

/// Scores both splits and returns (train, validation) reports.
pub fn evaluate(
    model: &LogisticModel,
    train: &Dataset,
    valid: &Dataset,
) -> Result<(MetricsReport, MetricsReport)> {
    Ok((
        report_for(model, train, "train")?,
        report_for(model, valid, "validation")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Pairwise Mann-Whitney oracle: fraction of (positive, negative) pairs
    /// with the positive scored higher, ties counting one half.
    fn auc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let mut concordant = 0.0;
        let mut pairs = 0.0;
        for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
            for (j, (&sj, &lj)) in scores.iter().zip(labels).enumerate() {
                if i == j || li != 1 || lj != 0 {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    concordant += 1.0;
                } else if si == sj {
                    concordant += 0.5;
                }
            }
        }
        concordant / pairs
    }

    /// Exhaustive KS oracle: evaluate |F_neg - F_pos| at every sample point.
    fn ks_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&s, _)| s)
            .collect();
        let mut best = 0.0f64;
        for &x in scores {
            let f_pos = pos.iter().filter(|&&v| v <= x).count() as f64 / pos.len() as f64;
            let f_neg = neg.iter().filter(|&&v| v <= x).count() as f64 / neg.len() as f64;
            best = best.max((f_neg - f_pos).abs());
        }
        best
    }

    fn random_scored_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
        let n = rng.random_range(5..=200usize);
        loop {
            let labels: Vec<u8> = (0..n).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
            if labels.contains(&1) && labels.contains(&0) {
                // quantize some scores to force ties
                let scores: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < 0.3 {
                            (rng.random::<f64>() * 10.0).round() / 10.0
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect();
                return (scores, labels);
            }
        }
    }

    #[test]
    fn accuracy_all_correct_is_one() {
        let (acc, _) = accuracy(&[0.9, 0.1, 0.8], &[1, 0, 1], 0.5).unwrap();
        assert_relative_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_matches_confusion_arithmetic() {
        // tp=3 tn=2 fp=1 fn=2 -> 5/8
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.6, 0.3, 0.4];
        let labels = [1, 1, 1, 0, 0, 0, 1, 1];
        let (acc, counts) = accuracy(&scores, &labels, 0.5).unwrap();
        assert_eq!(counts.true_positives, 3);
        assert_eq!(counts.true_negatives, 2);
        assert_eq!(counts.false_positives, 1);
        assert_eq!(counts.false_negatives, 2);
        assert_relative_eq!(acc, 0.625);
    }

    #[test]
    fn score_exactly_at_cutoff_classifies_as_zero() {
        let (acc, counts) = accuracy(&[0.5], &[0], 0.5).unwrap();
        assert_eq!(counts.true_negatives, 1);
        assert_relative_eq!(acc, 1.0);
        let (acc2, counts2) = accuracy(&[0.5], &[1], 0.5).unwrap();
        assert_eq!(counts2.false_negatives, 1);
        assert_relative_eq!(acc2, 0.0);
    }

    #[test]
    fn accuracy_rejects_empty_input() {
        assert!(accuracy(&[], &[], 0.5).is_err());
    }

    #[test]
    fn auc_is_one_for_perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        assert_relative_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auc_is_half_for_constant_scores() {
        let scores = [0.4; 6];
        let labels = [1, 0, 1, 0, 1, 0];
        assert_relative_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_worked_example() {
        // positives {0.8, 0.6}, negatives {0.4, 0.7}: 3 of 4 pairs concordant
        let scores = [0.8, 0.6, 0.4, 0.7];
        let labels = [1, 1, 0, 0];
        assert_relative_eq!(roc_auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn auc_equals_mann_whitney_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        for _ in 0..300 {
            let (scores, labels) = random_scored_set(&mut rng);
            let ours = roc_auc(&scores, &labels).unwrap();
            let oracle = auc_oracle(&scores, &labels);
            assert!(
                (ours - oracle).abs() < 1e-10,
                "auc {ours} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn auc_label_flip_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..100 {
            let (scores, labels) = random_scored_set(&mut rng);
            let flipped: Vec<u8> = labels.iter().map(|&l| 1 - l).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&scores, &flipped).unwrap();
            assert!((a - (1.0 - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_zero_for_identical_distributions() {
        let scores = [0.1, 0.5, 0.9, 0.1, 0.5, 0.9];
        let labels = [1, 1, 1, 0, 0, 0];
        assert_relative_eq!(ks_stat(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn ks_one_for_disjoint_supports() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        assert_relative_eq!(ks_stat(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn ks_worked_example() {
        // positives {0.8, 0.6}, negatives {0.4, 0.7}: gaps 0.5, 0, 0.5, 0
        let scores = [0.8, 0.6, 0.4, 0.7];
        let labels = [1, 1, 0, 0];
        assert_relative_eq!(ks_stat(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn ks_matches_exhaustive_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        for _ in 0..300 {
            let (scores, labels) = random_scored_set(&mut rng);
            let ours = ks_stat(&scores, &labels).unwrap();
            let oracle = ks_oracle(&scores, &labels);
            assert_eq!(ours, oracle, "KS must equal the brute-force maximum");
        }
    }

    #[test]
    fn auc_and_ks_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        for _ in 0..50 {
            let (scores, labels) = random_scored_set(&mut rng);
            let auc0 = roc_auc(&scores, &labels).unwrap();
            let ks0 = ks_stat(&scores, &labels).unwrap();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
            assert!((roc_auc(&transformed, &labels).unwrap() - auc0).abs() < 1e-12);
            assert!((ks_stat(&transformed, &labels).unwrap() - ks0).abs() < 1e-12);
        }
    }
}
