//! Classification metrics and decision-threshold selection.
//!
//! A sample is predicted positive when its score is strictly greater than the
//! threshold. Two selection policies are provided: maximize F1, or maximize
//! recall subject to F1 staying above a fraction of its optimum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples")]
    Empty,
    #[error("need both classes, got a single one")]
    SingleClass,
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
    #[error("threshold step {0} outside (0, 0.5]")]
    StepRange(f64),
    #[error("invalid batch: {0}")]
    BadBatch(String),
}

/// A scored sample; mining is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts and precision/recall/F1 at one threshold. Conventions:
/// precision is 0 when nothing is predicted positive, recall is 0 when no
/// positives exist, F1 is 0 when precision and recall are both 0.
pub fn confusion_and_prf(samples: &[ScoredSample], threshold: f64) -> Result<ConfusionMetrics, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        if !s.score.is_finite() || !(0.0..=1.0).contains(&s.score) {
            return Err(EvalError::ScoreRange(s.score));
        }
        match (s.score > threshold, s.truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ConfusionMetrics { tp, fp, fn_, tn, precision, recall, f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over every distinct score cut (tied scores grouped) and its
/// area by trapezoidal integration.
pub fn roc_auc(samples: &[ScoredSample]) -> Result<RocCurve, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let positives = samples.iter().filter(|s| s.truth).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let cut = sorted[i].score;
        while i < sorted.len() && sorted[i].score == cut {
            if sorted[i].truth {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: cut,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }

    let auc = points
        .windows(2)
        .map(|pair| (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Validated multiclass evaluation batch: one-hot truth rows and probability
/// rows that sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassEvalBatch {
    truth: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

impl MulticlassEvalBatch {
    pub fn new(truth: Vec<Vec<f64>>, probs: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        if truth.is_empty() || truth.len() != probs.len() {
            return Err(EvalError::BadBatch("empty batch or length mismatch".into()));
        }
        let classes = truth[0].len();
        if classes < 2 {
            return Err(EvalError::BadBatch("need at least two classes".into()));
        }
        for (y, p) in truth.iter().zip(&probs) {
            if y.len() != classes || p.len() != classes {
                return Err(EvalError::BadBatch("ragged rows".into()));
            }
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(EvalError::BadBatch("truth row is not one-hot".into()));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(EvalError::BadBatch(format!("probability row sums to {total}")));
            }
        }
        Ok(MulticlassEvalBatch { truth, probs })
    }

    pub fn from_labels(labels: &[usize], classes: usize, probs: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        let truth = labels
            .iter()
            .map(|&l| {
                let mut row = vec![0.0; classes];
                if l < classes {
                    row[l] = 1.0;
                }
                row
            })
            .collect();
        Self::new(truth, probs)
    }

    pub fn n_samples(&self) -> usize {
        self.truth.len()
    }
}

/// Multinomial log loss `-(1/N) * sum_i sum_j y_ij * ln(p_ij)` with
/// probabilities clamped to `[eps, 1 - eps]`.
pub fn mlogloss(batch: &MulticlassEvalBatch, eps: f64) -> f64 {
    let n = batch.truth.len() as f64;
    let total: f64 = batch
        .truth
        .iter()
        .zip(&batch.probs)
        .map(|(y, p)| {
            y.iter()
                .zip(p)
                .filter(|(&yv, _)| yv == 1.0)
                .map(|(_, &pv)| pv.clamp(eps, 1.0 - eps).ln())
                .sum::<f64>()
        })
        .sum();
    -total / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics at thresholds `0, step, ..., 1` inclusive.
pub fn sweep_thresholds(samples: &[ScoredSample], step: f64) -> Result<Vec<ThresholdMetrics>, EvalError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(EvalError::StepRange(step));
    }
    let n = (1.0 / step).round() as usize;
    let mut table = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let threshold = if i == n { 1.0 } else { i as f64 * step };
        let m = confusion_and_prf(samples, threshold)?;
        table.push(ThresholdMetrics {
            threshold,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicyKind {
    /// Threshold with the highest F1 (smallest threshold on ties).
    OptimalF1,
    /// Among thresholds whose F1 stays within `f1_floor_ratio` of the best
    /// F1, the one with the highest recall (ties: larger F1, then smaller
    /// threshold).
    OptimalSensitivity,
}

impl ThresholdPolicyKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" | "optimal_f1" => Some(ThresholdPolicyKind::OptimalF1),
            "sensitivity" | "optimal_sensitivity" => Some(ThresholdPolicyKind::OptimalSensitivity),
            _ => None,
        }
    }
}

/// A chosen operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: ThresholdPolicyKind,
    pub f1_floor_ratio: f64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pick an operating point from a sweep table.
pub fn pick_threshold(
    table: &[ThresholdMetrics],
    kind: ThresholdPolicyKind,
    f1_floor_ratio: f64,
) -> Result<ThresholdPolicy, EvalError> {
    if table.is_empty() {
        return Err(EvalError::Empty);
    }
    let best = match kind {
        ThresholdPolicyKind::OptimalF1 => table
            .iter()
            .fold(None::<&ThresholdMetrics>, |acc, row| match acc {
                Some(best) if row.f1 <= best.f1 => Some(best),
                _ => Some(row),
            })
            .unwrap(),
        ThresholdPolicyKind::OptimalSensitivity => {
            let max_f1 = table.iter().map(|r| r.f1).fold(f64::NEG_INFINITY, f64::max);
            let floor = f1_floor_ratio * max_f1;
            table
                .iter()
                .filter(|r| r.f1 >= floor)
                .fold(None::<&ThresholdMetrics>, |acc, row| match acc {
                    Some(best)
                        if row.recall < best.recall
                            || (row.recall == best.recall && row.f1 <= best.f1) =>
                    {
                        Some(best)
                    }
                    _ => Some(row),
                })
                .unwrap()
        }
    };
    Ok(ThresholdPolicy {
        kind,
        f1_floor_ratio,
        threshold: best.threshold,
        precision: best.precision,
        recall: best.recall,
        f1: best.f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sample(score: f64, truth: bool) -> ScoredSample {
        ScoredSample { score, truth }
    }

    #[test]
    fn prf_arithmetic() {
        // 99 TP, 1 FP, 1 FN.
        let mut samples = vec![sample(0.9, true); 99];
        samples.push(sample(0.9, false));
        samples.push(sample(0.1, true));
        let m = confusion_and_prf(&samples, 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (99, 1, 1));
        assert_relative_eq!(m.precision, 0.99);
        assert_relative_eq!(m.recall, 0.99);
        assert_relative_eq!(m.f1, 0.99);
    }

    #[test]
    fn no_predicted_positives_convention() {
        let samples = vec![sample(0.3, true), sample(0.4, false)];
        let m = confusion_and_prf(&samples, 1.0).unwrap();
        assert_eq!(m.tp + m.fp, 0);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn empty_samples_error() {
        assert!(matches!(confusion_and_prf(&[], 0.5), Err(EvalError::Empty)));
    }

    #[test]
    fn auc_perfect_separation() {
        let samples = vec![
            sample(0.9, true),
            sample(0.8, true),
            sample(0.2, false),
            sample(0.1, false),
        ];
        assert_relative_eq!(roc_auc(&samples).unwrap().auc, 1.0);
    }

    #[test]
    fn auc_constant_scores_is_half() {
        let samples = vec![sample(0.5, true), sample(0.5, false), sample(0.5, true)];
        assert_relative_eq!(roc_auc(&samples).unwrap().auc, 0.5);
    }

    #[test]
    fn auc_single_class_error() {
        assert!(matches!(
            roc_auc(&[sample(0.4, true)]),
            Err(EvalError::SingleClass)
        ));
    }

    /// Pairwise Mann-Whitney AUC with half credit for ties.
    fn pairwise_auc(samples: &[ScoredSample]) -> f64 {
        let pos: Vec<f64> = samples.iter().filter(|s| s.truth).map(|s| s.score).collect();
        let neg: Vec<f64> = samples.iter().filter(|s| !s.truth).map(|s| s.score).collect();
        let mut total = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    total += 1.0;
                } else if p == n {
                    total += 0.5;
                }
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(4..60);
            let samples: Vec<ScoredSample> = (0..n)
                .map(|_| sample((rng.gen_range(0..=20) as f64) / 20.0, rng.gen_bool(0.5)))
                .collect();
            if samples.iter().all(|s| s.truth) || samples.iter().all(|s| !s.truth) {
                continue;
            }
            let curve = roc_auc(&samples).unwrap();
            assert!((curve.auc - pairwise_auc(&samples)).abs() < 1e-9);
        }
    }

    #[test]
    fn mlogloss_perfect_predictions() {
        let batch = MulticlassEvalBatch::from_labels(
            &[0, 1, 2],
            3,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        assert!(mlogloss(&batch, 1e-15) <= 1e-14);
    }

    #[test]
    fn mlogloss_uniform_is_ln_m() {
        for m in 2..=9 {
            let probs = vec![vec![1.0 / m as f64; m]; 4];
            let batch = MulticlassEvalBatch::from_labels(&[0, 1, 0, 1], m, probs).unwrap();
            assert_relative_eq!(mlogloss(&batch, 1e-15), (m as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_rejects_non_onehot() {
        let err = MulticlassEvalBatch::new(
            vec![vec![1.0, 1.0]],
            vec![vec![0.5, 0.5]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn batch_rejects_unnormalized_probs() {
        let err = MulticlassEvalBatch::new(
            vec![vec![1.0, 0.0]],
            vec![vec![0.7, 0.7]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn sweep_recall_monotone_and_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<ScoredSample> = (0..80)
            .map(|_| sample(rng.gen_range(0.0..=1.0), rng.gen_bool(0.4)))
            .collect();
        let table = sweep_thresholds(&samples, 0.01).unwrap();
        assert_eq!(table.len(), 101);
        assert_eq!(table.last().unwrap().threshold, 1.0);
        for pair in table.windows(2) {
            assert!(pair[1].recall <= pair[0].recall + 1e-12);
        }
        for row in &table {
            let m = confusion_and_prf(&samples, row.threshold).unwrap();
            assert_eq!(m.f1, row.f1);
        }
    }

    #[test]
    fn sweep_all_scored_one() {
        let samples = vec![sample(1.0, true); 5];
        let table = sweep_thresholds(&samples, 0.25).unwrap();
        for row in &table {
            if row.threshold < 1.0 {
                assert_eq!(row.recall, 1.0);
            }
        }
    }

    fn row(threshold: f64, recall: f64, f1: f64) -> ThresholdMetrics {
        // Back out the precision consistent with (recall, f1).
        let precision = f1 * recall / (2.0 * recall - f1);
        ThresholdMetrics { threshold, precision, recall, f1 }
    }

    #[test]
    fn policies_on_reference_operating_points() {
        // Sweep shaped like the reference curve: best F1 0.972 at 0.42 and a
        // floor of 0.972 * 0.99 ~= 0.9623 that admits 0.20static with recall 0.99.
        let table = vec![
            row(0.10, 0.995, 0.958),
            row(0.20, 0.99, 0.9623),
            row(0.30, 0.985, 0.968),
            row(0.42, 0.97, 0.972),
            row(0.50, 0.95, 0.965),
            row(0.80, 0.90, 0.93),
        ];
        let f1_pick = pick_threshold(&table, ThresholdPolicyKind::OptimalF1, 0.99).unwrap();
        assert_eq!(f1_pick.threshold, 0.42);
        assert_relative_eq!(f1_pick.f1, 0.972);

        let sens = pick_threshold(&table, ThresholdPolicyKind::OptimalSensitivity, 0.99).unwrap();
        assert_eq!(sens.threshold, 0.20);
        assert_relative_eq!(sens.recall, 0.99);
        assert!(sens.f1 >= 0.99 * 0.972);
    }

    #[test]
    fn flat_f1_ties_take_lowest_threshold() {
        let table = vec![row(0.1, 0.9, 0.9), row(0.2, 0.9, 0.9), row(0.3, 0.9, 0.9)];
        let f1_pick = pick_threshold(&table, ThresholdPolicyKind::OptimalF1, 0.99).unwrap();
        assert_eq!(f1_pick.threshold, 0.1);
        let sens = pick_threshold(&table, ThresholdPolicyKind::OptimalSensitivity, 0.99).unwrap();
        assert_eq!(sens.threshold, 0.1);
    }

    proptest! {
        // The sensitivity policy never loses recall relative to the F1 policy
        // and respects the F1 floor by construction.
        #[test]
        fn sensitivity_dominates_recall(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(10..120);
            let samples: Vec<ScoredSample> = (0..n)
                .map(|_| sample(rng.gen_range(0.0..=1.0), rng.gen_bool(0.5)))
                .collect();
            prop_assume!(samples.iter().any(|s| s.truth));
            let table = sweep_thresholds(&samples, 0.01).unwrap();
            let f1_pick = pick_threshold(&table, ThresholdPolicyKind::OptimalF1, 0.99).unwrap();
            let sens = pick_threshold(&table, ThresholdPolicyKind::OptimalSensitivity, 0.99).unwrap();
            prop_assert!(sens.recall >= f1_pick.recall);
            prop_assert!(sens.f1 >= 0.99 * f1_pick.f1 - 1e-12);
        }
    }
}
