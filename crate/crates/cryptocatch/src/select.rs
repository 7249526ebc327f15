//! Feature relevance: univariate significance testing with
//! Benjamini-Hochberg false-discovery-rate control before training, and
//! gain-based importance ranking after training.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::ingest::Label;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("labels contain a single class; need both")]
    SingleClass,
    #[error("feature column `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("matrix rows and labels differ in length")]
    LengthMismatch,
}

/// Two-sided Mann-Whitney U p-value of a feature column against binary
/// labels, using the normal approximation with tie and continuity
/// corrections. A constant column yields 1.0 (no evidence either way).
pub fn univariate_pvalue(column: &[f64], labels: &[bool]) -> Result<f64, SelectError> {
    if column.len() != labels.len() {
        return Err(SelectError::LengthMismatch);
    }
    let n1 = labels.iter().filter(|&&l| l).count();
    let n2 = labels.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(SelectError::SingleClass);
    }

    // Average ranks with ties.
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; column.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    let n = column.len() as f64;
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = n1f * n2f + n1f * (n1f + 1.0) / 2.0 - rank_sum;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(1.0); // all values tied
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    // Two-sided tail of the standard normal: p = erfc(z / sqrt(2)).
    Ok(libm::erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

/// Per-feature outcome of the step-up adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSignificance {
    pub feature: String,
    pub p: f64,
    pub p_adjusted: f64,
    pub selected: bool,
}

/// Significance report in original feature order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub alpha: f64,
    pub entries: Vec<FeatureSignificance>,
}

impl SignificanceReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.selected)
            .map(|e| e.feature.clone())
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "feature,p,p_adj,selected")?;
        for e in &self.entries {
            writeln!(writer, "{},{},{},{}", e.feature, e.p, e.p_adjusted, e.selected)?;
        }
        Ok(())
    }
}

/// Benjamini-Hochberg step-up adjustment.
///
/// With sorted p-values `p_(1) <= ... <= p_(m)`, the adjusted value of the
/// i-th is `min(1, min_{j >= i} m * p_(j) / j)`; a feature is selected when
/// its adjusted p-value is strictly below `alpha`. Results are reported in
/// the original order.
pub fn benjamini_hochberg(named_pvalues: &[(String, f64)], alpha: f64) -> SignificanceReport {
    let m = named_pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| named_pvalues[a].1.total_cmp(&named_pvalues[b].1));

    let mut adjusted = vec![0.0; m];
    let mut running_min = 1.0f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let candidate = m as f64 * named_pvalues[idx].1 / (rank + 1) as f64;
        running_min = running_min.min(candidate);
        adjusted[idx] = running_min;
    }

    SignificanceReport {
        alpha,
        entries: named_pvalues
            .iter()
            .zip(&adjusted)
            .map(|((feature, p), &p_adjusted)| FeatureSignificance {
                feature: feature.clone(),
                p: *p,
                p_adjusted,
                selected: p_adjusted < alpha,
            })
            .collect(),
    }
}

/// Binary selection: BH-adjusted Mann-Whitney p-values per feature column,
/// keeping names whose adjusted p falls below `alpha` (original order).
pub fn select_features_binary(
    matrix: &FeatureMatrix,
    labels: &[bool],
    alpha: f64,
) -> Result<SignificanceReport, SelectError> {
    if matrix.n_rows() != labels.len() {
        return Err(SelectError::LengthMismatch);
    }
    let mut named = Vec::with_capacity(matrix.feature_names.len());
    for (col, name) in matrix.feature_names.iter().enumerate() {
        let column: Vec<f64> = matrix.rows.iter().map(|row| row[col]).collect();
        if column.iter().any(|v| !v.is_finite()) {
            return Err(SelectError::NonFinite(name.clone()));
        }
        named.push((name.clone(), univariate_pvalue(&column, labels)?));
    }
    Ok(benjamini_hochberg(&named, alpha))
}

/// Multiclass selection via one-vs-rest: each class gets its own BH pass and
/// a feature keeps the minimum adjusted p across classes.
pub fn select_features_multiclass(
    matrix: &FeatureMatrix,
    labels: &[Label],
    alpha: f64,
) -> Result<SignificanceReport, SelectError> {
    if matrix.n_rows() != labels.len() {
        return Err(SelectError::LengthMismatch);
    }
    let mut classes: Vec<Label> = labels.to_vec();
    classes.sort_by_key(|l| l.as_str());
    classes.dedup();
    if classes.len() < 2 {
        return Err(SelectError::SingleClass);
    }

    let mut best: Vec<FeatureSignificance> = Vec::new();
    for class in &classes {
        let binary: Vec<bool> = labels.iter().map(|l| l == class).collect();
        let report = select_features_binary(matrix, &binary, alpha)?;
        if best.is_empty() {
            best = report.entries;
        } else {
            for (acc, entry) in best.iter_mut().zip(report.entries) {
                if entry.p_adjusted < acc.p_adjusted {
                    acc.p = entry.p;
                    acc.p_adjusted = entry.p_adjusted;
                }
            }
        }
    }
    for entry in &mut best {
        entry.selected = entry.p_adjusted < alpha;
    }
    Ok(SignificanceReport { alpha, entries: best })
}

/// Feature importances sorted by descending score; equal scores are ordered
/// alphabetically for reproducibility.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<(String, f64)>,
}

impl ImportanceRanking {
    pub fn new(mut entries: Vec<(String, f64)>) -> ImportanceRanking {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ImportanceRanking { entries }
    }

    pub fn top_k(&self, k: usize) -> Vec<String> {
        self.entries
            .iter()
            .take(k)
            .map(|(name, _)| name.clone())
            .collect()
    }
}
