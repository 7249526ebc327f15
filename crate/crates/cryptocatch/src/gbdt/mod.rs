//! Gradient-boosted decision trees trained with per-round Newton steps on
//! logistic loss (binary) or softmax cross-entropy (one tree per class per
//! round). Exact greedy splits, seeded row/column subsampling per tree,
//! gain-based importances and JSON persistence.

mod tree;

pub use tree::{DecisionTree, TreeNode};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{self, MulticlassEvalBatch, ScoredSample};
use crate::select::ImportanceRanking;
use tree::{grow_tree, presort_columns, GrowParams};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("invalid hyperparameter: {0}")]
    BadHyperparams(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite feature value at row {0}")]
    NonFinite(usize),
    #[error("row is missing model feature `{0}`")]
    MissingFeature(String),
    #[error("row has {got} values, model expects {want}")]
    RowWidth { got: usize, want: usize },
    #[error("each class needs at least {folds} samples for {folds}-fold CV")]
    TooFewPerClass { folds: usize },
    #[error("unsupported model format or version")]
    BadFormat,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Boosting hyperparameters. Defaults are the tuned operating point used
/// throughout: shallow trees with strong row/column subsampling and a fairly
/// aggressive learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Minimum split gain.
    pub gamma: f64,
    pub max_depth: usize,
    /// Fraction of rows sampled per tree, in (0, 1].
    pub subsample: f64,
    /// Fraction of features sampled per tree, in (0, 1].
    pub colsample_bytree: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub learning_rate: f64,
    pub num_rounds: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.01,
            max_depth: 4,
            subsample: 0.819,
            colsample_bytree: 0.514,
            min_child_weight: 5.0,
            learning_rate: 0.409,
            num_rounds: 50,
            lambda: 1.0,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |msg: &str| Err(GbdtError::BadHyperparams(msg.to_string()));
        if !(self.gamma >= 0.0) {
            return bad("gamma must be >= 0");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree must be in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.num_rounds == 0 {
            return bad("num_rounds must be >= 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            gamma: self.gamma,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Multiclass { classes: usize },
}

/// A trained ensemble: `trees[round]` holds one tree (binary) or one tree
/// per class (multiclass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub task: Task,
    pub feature_names: Vec<String>,
    /// Initial margin: log-odds of the positive prior for binary, 0 for
    /// multiclass.
    pub base_score: f64,
    pub trees: Vec<Vec<DecisionTree>>,
    pub hyperparams: Hyperparams,
    /// Class names for multiclass models, index-aligned with outputs.
    #[serde(default)]
    pub class_names: Vec<String>,
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean training loss after each round (logistic loss or softmax
    /// cross-entropy).
    pub train_loss: Vec<f64>,
    /// Mean validation loss per round when a validation set was supplied.
    pub validation_loss: Vec<f64>,
    /// Round count kept after early stopping, if it triggered.
    pub stopped_early_at: Option<usize>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_into(scores: &[f64], out: &mut Vec<f64>) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(scores.iter().map(|s| (s - max).exp()));
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
}

const HESS_FLOOR: f64 = 1e-16;

fn validate_input(rows: &[Vec<f64>], labels: &[usize], task: Task) -> Result<(), GbdtError> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(GbdtError::DegenerateInput(
            "empty input or row/label length mismatch".into(),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GbdtError::NonFinite(i));
        }
    }
    let classes = match task {
        Task::Binary => 2,
        Task::Multiclass { classes } => classes,
    };
    if classes < 2 {
        return Err(GbdtError::DegenerateInput("need at least 2 classes".into()));
    }
    let mut counts = vec![0usize; classes];
    for &label in labels {
        if label >= classes {
            return Err(GbdtError::DegenerateInput(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        counts[label] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c < 2) {
        return Err(GbdtError::DegenerateInput(format!(
            "class {class} has fewer than 2 samples"
        )));
    }
    Ok(())
}

fn sample_rows(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<bool> {
    if fraction >= 1.0 {
        return vec![true; n];
    }
    let keep = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let mut mask = vec![false; n];
    for &i in &indices[..keep] {
        mask[i] = true;
    }
    mask
}

fn sample_columns(rng: &mut ChaCha8Rng, d: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..d).collect();
    }
    let keep = ((fraction * d as f64).ceil() as usize).clamp(1, d);
    let mut indices: Vec<usize> = (0..d).collect();
    indices.shuffle(rng);
    let mut chosen: Vec<usize> = indices[..keep].to_vec();
    chosen.sort_unstable(); // deterministic search order over the subset
    chosen
}

/// Train an ensemble. See [`train_traced`] for per-round loss access.
pub fn train(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    hp: &Hyperparams,
    task: Task,
) -> Result<BoostedEnsemble, GbdtError> {
    train_traced(feature_names, rows, labels, hp, task).map(|(model, _)| model)
}

/// Train and return the per-round mean training loss alongside the model.
pub fn train_traced(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    hp: &Hyperparams,
    task: Task,
) -> Result<(BoostedEnsemble, TrainTrace), GbdtError> {
    train_inner(feature_names, rows, labels, hp, task, None, 10)
}

/// Train with early stopping on validation loss: stop once the validation
/// loss has not improved for `patience` rounds and keep the best round count.
pub fn train_with_validation(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    hp: &Hyperparams,
    task: Task,
    validation: (&[Vec<f64>], &[usize]),
    patience: usize,
) -> Result<(BoostedEnsemble, TrainTrace), GbdtError> {
    train_inner(feature_names, rows, labels, hp, task, Some(validation), patience)
}

fn train_inner(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    hp: &Hyperparams,
    task: Task,
    validation: Option<(&[Vec<f64>], &[usize])>,
    patience: usize,
) -> Result<(BoostedEnsemble, TrainTrace), GbdtError> {
    hp.validate()?;
    validate_input(rows, labels, task)?;
    if rows[0].len() != feature_names.len() {
        return Err(GbdtError::RowWidth {
            got: rows[0].len(),
            want: feature_names.len(),
        });
    }

    let n = rows.len();
    let d = feature_names.len();
    let sorted_columns = presort_columns(rows, d);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let grow = hp.grow_params();
    let mut trace = TrainTrace::default();

    let mut model = BoostedEnsemble {
        task,
        feature_names: feature_names.to_vec(),
        base_score: 0.0,
        trees: Vec::with_capacity(hp.num_rounds),
        hyperparams: hp.clone(),
        class_names: Vec::new(),
    };

    let mut best_round = 0usize;
    let mut best_valid = f64::INFINITY;

    match task {
        Task::Binary => {
            let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
            let prior = y.iter().sum::<f64>() / n as f64;
            model.base_score = (prior / (1.0 - prior)).ln();
            let mut margins = vec![model.base_score; n];

            for round in 0..hp.num_rounds {
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n];
                for i in 0..n {
                    let p = sigmoid(margins[i]);
                    grad[i] = p - y[i];
                    hess[i] = (p * (1.0 - p)).max(HESS_FLOOR);
                }
                let in_sample = sample_rows(&mut rng, n, hp.subsample);
                let columns = sample_columns(&mut rng, d, hp.colsample_bytree);
                let tree = grow_tree(rows, &sorted_columns, &grad, &hess, &in_sample, &columns, &grow);
                for i in 0..n {
                    margins[i] += tree.predict_row(&rows[i]);
                }
                model.trees.push(vec![tree]);

                let loss = margins
                    .iter()
                    .zip(&y)
                    .map(|(&m, &yv)| logistic_loss(m, yv))
                    .sum::<f64>()
                    / n as f64;
                trace.train_loss.push(loss);

                if let Some((vrows, vlabels)) = validation {
                    let vloss = vrows
                        .iter()
                        .zip(vlabels)
                        .map(|(row, &l)| logistic_loss(model.margin_binary(row), l as f64))
                        .sum::<f64>()
                        / vrows.len() as f64;
                    trace.validation_loss.push(vloss);
                    if vloss < best_valid - 1e-12 {
                        best_valid = vloss;
                        best_round = round + 1;
                    } else if round + 1 - best_round >= patience {
                        trace.stopped_early_at = Some(best_round);
                        break;
                    }
                }
            }
        }
        Task::Multiclass { classes } => {
            model.base_score = 0.0;
            let mut margins = vec![vec![0.0; classes]; n];
            let mut probs_buf = Vec::with_capacity(classes);

            for round in 0..hp.num_rounds {
                // Gradients for all class trees come from the same snapshot
                // of the softmax probabilities at the start of the round.
                let mut probs = vec![vec![0.0; classes]; n];
                for i in 0..n {
                    softmax_into(&margins[i], &mut probs_buf);
                    probs[i].copy_from_slice(&probs_buf);
                }
                let mut round_trees = Vec::with_capacity(classes);
                for class in 0..classes {
                    let mut grad = vec![0.0; n];
                    let mut hess = vec![0.0; n];
                    for i in 0..n {
                        let p = probs[i][class];
                        let y = if labels[i] == class { 1.0 } else { 0.0 };
                        grad[i] = p - y;
                        hess[i] = (p * (1.0 - p)).max(HESS_FLOOR);
                    }
                    let in_sample = sample_rows(&mut rng, n, hp.subsample);
                    let columns = sample_columns(&mut rng, d, hp.colsample_bytree);
                    let tree =
                        grow_tree(rows, &sorted_columns, &grad, &hess, &in_sample, &columns, &grow);
                    for i in 0..n {
                        margins[i][class] += tree.predict_row(&rows[i]);
                    }
                    round_trees.push(tree);
                }
                model.trees.push(round_trees);

                let loss = (0..n)
                    .map(|i| {
                        softmax_into(&margins[i], &mut probs_buf);
                        -(probs_buf[labels[i]].max(1e-15)).ln()
                    })
                    .sum::<f64>()
                    / n as f64;
                trace.train_loss.push(loss);

                if let Some((vrows, vlabels)) = validation {
                    let vloss = vrows
                        .iter()
                        .zip(vlabels)
                        .map(|(row, &l)| {
                            let p = model.predict_proba(row).expect("validated width");
                            -(p[l].max(1e-15)).ln()
                        })
                        .sum::<f64>()
                        / vrows.len() as f64;
                    trace.validation_loss.push(vloss);
                    if vloss < best_valid - 1e-12 {
                        best_valid = vloss;
                        best_round = round + 1;
                    } else if round + 1 - best_round >= patience {
                        trace.stopped_early_at = Some(best_round);
                        break;
                    }
                }
            }
        }
    }

    if let Some(best) = trace.stopped_early_at {
        model.trees.truncate(best);
    }
    Ok((model, trace))
}

fn logistic_loss(margin: f64, y: f64) -> f64 {
    // Numerically stable -y*ln(p) - (1-y)*ln(1-p).
    let m = margin;
    if m >= 0.0 {
        (1.0 + (-m).exp()).ln() + (1.0 - y) * m
    } else {
        (1.0 + m.exp()).ln() - y * m
    }
}

impl BoostedEnsemble {
    fn margin_binary(&self, row: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .map(|round| round[0].predict_row(row))
                .sum::<f64>()
    }

    /// Probabilities for one row aligned to `feature_names`: `[p_positive]`
    /// for binary, a distribution over classes for multiclass.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>, GbdtError> {
        if row.len() != self.feature_names.len() {
            return Err(GbdtError::RowWidth {
                got: row.len(),
                want: self.feature_names.len(),
            });
        }
        match self.task {
            Task::Binary => Ok(vec![sigmoid(self.margin_binary(row))]),
            Task::Multiclass { classes } => {
                let mut scores = vec![self.base_score; classes];
                for round in &self.trees {
                    for (class, tree) in round.iter().enumerate() {
                        scores[class] += tree.predict_row(row);
                    }
                }
                let mut probs = Vec::with_capacity(classes);
                softmax_into(&scores, &mut probs);
                Ok(probs)
            }
        }
    }

    /// Probabilities for a named row: values are matched to the model's
    /// feature order; a missing feature name is an error.
    pub fn predict_proba_named(&self, names: &[String], values: &[f64]) -> Result<Vec<f64>, GbdtError> {
        let mapping = self.align_columns(names)?;
        let row: Vec<f64> = mapping.iter().map(|&i| values[i]).collect();
        self.predict_proba(&row)
    }

    /// For each model feature, its index in `names`; errors on the first
    /// missing feature.
    pub fn align_columns(&self, names: &[String]) -> Result<Vec<usize>, GbdtError> {
        self.feature_names
            .iter()
            .map(|needed| {
                names
                    .iter()
                    .position(|n| n == needed)
                    .ok_or_else(|| GbdtError::MissingFeature(needed.clone()))
            })
            .collect()
    }

    /// Score a whole matrix (columns matched by name).
    pub fn predict_matrix(&self, matrix: &crate::features::FeatureMatrix) -> Result<Vec<Vec<f64>>, GbdtError> {
        let mapping = self.align_columns(&matrix.feature_names)?;
        matrix
            .rows
            .iter()
            .map(|row| {
                let aligned: Vec<f64> = mapping.iter().map(|&i| row[i]).collect();
                self.predict_proba(&aligned)
            })
            .collect()
    }

    /// Gain-based importances normalized to sum to 1; empty when no tree
    /// ever split.
    pub fn feature_importance(&self) -> ImportanceRanking {
        let mut gains = vec![0.0; self.feature_names.len()];
        for round in &self.trees {
            for tree in round {
                tree.accumulate_gain(&mut gains);
            }
        }
        let total: f64 = gains.iter().sum();
        if total <= 0.0 {
            return ImportanceRanking::default();
        }
        ImportanceRanking::new(
            self.feature_names
                .iter()
                .zip(&gains)
                .filter(|(_, &g)| g > 0.0)
                .map(|(name, &g)| (name.clone(), g / total))
                .collect(),
        )
    }

    pub fn save_json<W: std::io::Write>(&self, writer: W) -> Result<(), GbdtError> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            format: &'static str,
            version: u32,
            model: &'a BoostedEnsemble,
        }
        serde_json::to_writer(
            writer,
            &Envelope {
                format: "cryptocatch.model",
                version: 1,
                model: self,
            },
        )?;
        Ok(())
    }

    pub fn load_json<R: std::io::Read>(reader: R) -> Result<BoostedEnsemble, GbdtError> {
        #[derive(Deserialize)]
        struct Envelope {
            format: String,
            version: u32,
            model: BoostedEnsemble,
        }
        let envelope: Envelope = serde_json::from_reader(reader)?;
        if envelope.format != "cryptocatch.model" || envelope.version != 1 {
            return Err(GbdtError::BadFormat);
        }
        Ok(envelope.model)
    }
}

/// Binary fold metrics at the 0.5 decision point, plus ROC AUC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryFoldMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulticlassFoldMetrics {
    pub accuracy: f64,
    pub mlogloss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CvReport {
    Binary {
        folds: Vec<BinaryFoldMetrics>,
        mean: BinaryFoldMetrics,
    },
    Multiclass {
        folds: Vec<MulticlassFoldMetrics>,
        mean: MulticlassFoldMetrics,
    },
}

/// Seeded stratified K-fold assignment: per class, indices are shuffled and
/// dealt round-robin.
pub fn stratified_folds(
    labels: &[usize],
    classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, GbdtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in labels.iter().enumerate() {
        per_class[label].push(i);
    }
    if per_class.iter().any(|c| c.len() < folds) {
        return Err(GbdtError::TooFewPerClass { folds });
    }
    let mut assignment = vec![0usize; labels.len()];
    for indices in per_class.iter_mut() {
        indices.shuffle(&mut rng);
        for (pos, &i) in indices.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Stratified K-fold cross-validation; per-fold and mean metrics.
pub fn cross_validate(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    hp: &Hyperparams,
    task: Task,
    folds: usize,
    seed: u64,
) -> Result<CvReport, GbdtError> {
    if folds < 2 {
        return Err(GbdtError::BadHyperparams("folds must be >= 2".into()));
    }
    validate_input(rows, labels, task)?;
    let classes = match task {
        Task::Binary => 2,
        Task::Multiclass { classes } => classes,
    };
    let assignment = stratified_folds(labels, classes, folds, seed)?;

    let mut binary_folds = Vec::new();
    let mut multi_folds = Vec::new();
    for fold in 0..folds {
        let mut train_rows = Vec::new();
        let mut train_labels = Vec::new();
        let mut test_rows = Vec::new();
        let mut test_labels = Vec::new();
        for i in 0..rows.len() {
            if assignment[i] == fold {
                test_rows.push(rows[i].clone());
                test_labels.push(labels[i]);
            } else {
                train_rows.push(rows[i].clone());
                train_labels.push(labels[i]);
            }
        }
        let mut fold_hp = hp.clone();
        fold_hp.seed = hp.seed.wrapping_add(fold as u64);
        let model = train(feature_names, &train_rows, &train_labels, &fold_hp, task)?;

        match task {
            Task::Binary => {
                let samples: Vec<ScoredSample> = test_rows
                    .iter()
                    .zip(&test_labels)
                    .map(|(row, &l)| {
                        Ok(ScoredSample {
                            score: model.predict_proba(row)?[0],
                            truth: l == 1,
                        })
                    })
                    .collect::<Result<_, GbdtError>>()?;
                let prf = eval::confusion_and_prf(&samples, 0.5)
                    .map_err(|e| GbdtError::DegenerateInput(e.to_string()))?;
                let auc = eval::roc_auc(&samples)
                    .map_err(|e| GbdtError::DegenerateInput(e.to_string()))?
                    .auc;
                binary_folds.push(BinaryFoldMetrics {
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                    auc,
                });
            }
            Task::Multiclass { classes } => {
                let probs: Vec<Vec<f64>> = test_rows
                    .iter()
                    .map(|row| model.predict_proba(row))
                    .collect::<Result<_, _>>()?;
                let correct = probs
                    .iter()
                    .zip(&test_labels)
                    .filter(|(p, &l)| argmax(p) == l)
                    .count();
                let batch = MulticlassEvalBatch::from_labels(&test_labels, classes, probs)
                    .map_err(|e| GbdtError::DegenerateInput(e.to_string()))?;
                multi_folds.push(MulticlassFoldMetrics {
                    accuracy: correct as f64 / test_labels.len() as f64,
                    mlogloss: eval::mlogloss(&batch, 1e-15),
                });
            }
        }
    }

    Ok(match task {
        Task::Binary => {
            let k = binary_folds.len() as f64;
            let mean = BinaryFoldMetrics {
                precision: binary_folds.iter().map(|f| f.precision).sum::<f64>() / k,
                recall: binary_folds.iter().map(|f| f.recall).sum::<f64>() / k,
                f1: binary_folds.iter().map(|f| f.f1).sum::<f64>() / k,
                auc: binary_folds.iter().map(|f| f.auc).sum::<f64>() / k,
            };
            CvReport::Binary { folds: binary_folds, mean }
        }
        Task::Multiclass { .. } => {
            let k = multi_folds.len() as f64;
            let mean = MulticlassFoldMetrics {
                accuracy: multi_folds.iter().map(|f| f.accuracy).sum::<f64>() / k,
                mlogloss: multi_folds.iter().map(|f| f.mlogloss).sum::<f64>() / k,
            };
            CvReport::Multiclass { folds: multi_folds, mean }
        }
    })
}

/// Index of the largest value (first on ties).
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
