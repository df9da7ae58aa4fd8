//! Confusion-matrix metrics, stratified k-fold cross-validation and holdout splits.
//!
//! Micro averages pool TP/FP/FN over classes; macro averages take the
//! unweighted mean of per-class precision and recall. `macro_f1` is the
//! harmonic mean of macro precision and macro recall, while
//! `macro_f1_per_class_mean` is the mean of per-class F1 scores. Any 0/0
//! ratio is defined as 0 and sets `zero_division` on the report.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierError, TrainedClassifier};
use crate::dataset::{fit_minmax, Dataset, DatasetError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted labels")]
    Length { actual: usize, predicted: usize },
    #[error("label code {code} outside [0, {k})")]
    Code { code: usize, k: usize },
    #[error("invalid fold count {k} for {n} samples")]
    Folds { k: usize, n: usize },
    #[error("fold {fold}: training portion lacks class `{class}`")]
    MissingTrainingClass { fold: usize, class: String },
    #[error("test fraction {0} outside (0, 1)")]
    Fraction(f64),
    #[error("fold assignment covers {assigned} rows but dataset has {rows}")]
    FoldShape { assigned: usize, rows: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

pub fn confusion_matrix(actual: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(EvalError::Length {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&a, &p) in actual.iter().zip(predicted) {
        if let Some(code) = [a, p].into_iter().find(|&c| c >= k) {
            return Err(EvalError::Code { code, k });
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: (0..k).map(|c| c.to_string()).collect(),
    })
}

impl ConfusionMatrix {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        assert_eq!(names.len(), self.k(), "one name per class");
        self.class_names = names.to_vec();
        self
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn cell(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum::<u64>() - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> u64 {
        self.counts[c].iter().sum::<u64>() - self.tp(c)
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_f1_per_class_mean: f64,
    pub per_class: Vec<ClassMetrics>,
    pub support: Vec<u64>,
    /// Set when any ratio was 0/0 and defined as 0.
    pub zero_division: bool,
}

struct Ratio {
    zero_division: bool,
}

impl Ratio {
    fn of(&mut self, num: u64, den: u64) -> f64 {
        if den == 0 {
            self.zero_division = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn metrics_report(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.k();
    let mut ratio = Ratio {
        zero_division: false,
    };
    let mut per_class = Vec::with_capacity(k);
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0u64, 0u64, 0u64);
    for c in 0..k {
        let (tp, fp, fn_) = (cm.tp(c), cm.fp(c), cm.fn_(c));
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn_;
        per_class.push(ClassMetrics {
            label: cm.class_names()[c].clone(),
            precision: ratio.of(tp, tp + fp),
            recall: ratio.of(tp, tp + fn_),
            // count form of the harmonic mean of precision and recall
            f1: ratio.of(2 * tp, 2 * tp + fp + fn_),
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / k as f64
        }
    };
    let macro_precision = mean(|m| m.precision);
    let macro_recall = mean(|m| m.recall);
    let macro_f1_per_class_mean = mean(|m| m.f1);
    MetricsReport {
        accuracy: ratio.of(tp_sum, cm.total()),
        micro_precision: ratio.of(tp_sum, tp_sum + fp_sum),
        micro_recall: ratio.of(tp_sum, tp_sum + fn_sum),
        micro_f1: ratio.of(2 * tp_sum, 2 * tp_sum + fp_sum + fn_sum),
        macro_precision,
        macro_recall,
        macro_f1: harmonic(macro_precision, macro_recall),
        macro_f1_per_class_mean,
        support: (0..k).map(|c| cm.support(c)).collect(),
        per_class,
        zero_division: ratio.zero_division,
    }
}

/// Per-sample fold index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Within each class (ascending code) indices are shuffled by `seed` and
/// dealt round-robin; the dealing position carries over between classes
/// so small classes do not pile into the first folds.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(EvalError::Folds { k, n });
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let mut next = 0;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { folds, k, seed })
}

pub trait RowClassifier {
    fn predict_row(&self, row: &[f64]) -> usize;
}

impl RowClassifier for TrainedClassifier {
    fn predict_row(&self, row: &[f64]) -> usize {
        TrainedClassifier::predict_row(self, row)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Min-max range to scale features into, fitted per fold on the training rows.
    pub scale: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Arithmetic mean and sample standard deviation. Identical inputs give
/// exactly that value and a zero deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let first = values[0];
    let n = values.len() as f64;
    let mean = first + values.iter().map(|v| v - first).sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricsReport>,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub accuracy: MeanStd,
}

fn prepare_fold(data: &Dataset, folds: &FoldAssignment, fold: usize, options: &CvOptions) -> Result<(Dataset, Array2<f64>, Vec<usize>)> {
    let train_rows = folds.train_indices(fold);
    let test_rows = folds.test_indices(fold);
    let mut train = data.select_rows(&train_rows);
    let test = data.select_rows(&test_rows);
    let present = data.class_counts();
    let in_train = train.class_counts();
    if let Some(c) = (0..data.n_classes()).find(|&c| present[c] > 0 && in_train[c] == 0) {
        return Err(EvalError::MissingTrainingClass {
            fold,
            class: data.label_names()[c].clone(),
        });
    }
    let mut test_x = test.features().clone();
    if let Some(range) = options.scale {
        let params = fit_minmax(train.features(), range)?;
        train = train.with_features(params.apply(train.features())?)?;
        test_x = params.apply(&test_x)?;
    }
    Ok((train, test_x, test.labels().to_vec()))
}

/// Trains on all rows outside each fold and scores on the fold. Folds run
/// in parallel; results are ordered by fold index.
pub fn cross_validate<M, F>(trainer: F, data: &Dataset, folds: &FoldAssignment, options: &CvOptions) -> Result<CvReport>
where
    M: RowClassifier,
    F: Fn(&Dataset) -> std::result::Result<M, ClassifierError> + Sync,
{
    if folds.folds.len() != data.n_rows() {
        return Err(EvalError::FoldShape {
            assigned: folds.folds.len(),
            rows: data.n_rows(),
        });
    }
    let reports = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test_x, test_y) = prepare_fold(data, folds, fold, options)?;
            let model = trainer(&train)?;
            let predicted: Vec<usize> = test_x.rows().into_iter().map(|r| model.predict_row(&r.to_vec())).collect();
            let cm = confusion_matrix(&test_y, &predicted, data.n_classes())?.with_class_names(data.label_names());
            Ok(metrics_report(&cm))
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(CvReport {
        macro_precision: pick(|r| r.macro_precision),
        macro_recall: pick(|r| r.macro_recall),
        macro_f1: pick(|r| r.macro_f1),
        accuracy: pick(|r| r.accuracy),
        folds: reports,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Row-disjoint split. Stratified mode takes `round(n_c · fraction)` test
/// rows per class, keeping at least one row of each class in training.
pub fn holdout_split(data: &Dataset, test_fraction: f64, seed: u64, stratified: bool) -> Result<HoldoutSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::Fraction(test_fraction));
    }
    let n = data.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut test_rows = Vec::new();
    if stratified {
        let mut by_class = vec![Vec::new(); data.n_classes()];
        for (i, &c) in data.labels().iter().enumerate() {
            by_class[c].push(i);
        }
        for (c, members) in by_class.iter_mut().enumerate() {
            if members.len() == 1 {
                let msg = format!("class `{}` has a single sample; kept in training", data.label_names()[c]);
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            members.shuffle(&mut rng);
            let take = ((members.len() as f64 * test_fraction).round() as usize).min(members.len().saturating_sub(1));
            test_rows.extend_from_slice(&members[..take]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let take = ((n as f64 * test_fraction).round() as usize).clamp(n.min(1), n.saturating_sub(1));
        test_rows.extend_from_slice(&all[..take]);
    }
    test_rows.sort_unstable();
    let mut is_test = vec![false; n];
    test_rows.iter().for_each(|&i| is_test[i] = true);
    let train_rows: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    Ok(HoldoutSplit {
        train: data.select_rows(&train_rows),
        test: data.select_rows(&test_rows),
        train_rows,
        test_rows,
        warnings,
    })
}
