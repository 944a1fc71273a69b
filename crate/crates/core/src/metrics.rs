//! The five evaluation metrics: ROC AUC, precision, recall, F1 and accuracy.
//!
//! A score is predicted positive iff `score >= threshold`. Metrics whose
//! denominator is zero are reported as `None` rather than 0.

use alloc::vec::Vec;

use crate::dataset::{Label, LabeledExample};
use crate::head::{predict, HeadError, HeadParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no examples to evaluate")]
    EmptyInput,
    #[error("ROC analysis needs both classes present")]
    SingleClass,
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error(transparent)]
    Head(#[from] HeadError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn record(&mut self, predicted_positive: bool, label: Label) {
        match (predicted_positive, label) {
            (true, Label::Positive) => self.true_positives += 1,
            (true, Label::Negative) => self.false_positives += 1,
            (false, Label::Positive) => self.false_negatives += 1,
            (false, Label::Negative) => self.true_negatives += 1,
        }
    }

    /// tp / (tp + fp)
    pub fn precision(&self) -> Option<f64> {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// tp / (tp + fn)
    pub fn recall(&self) -> Option<f64> {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// Harmonic mean of precision and recall.
    pub fn f_score(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.true_positives + self.true_negatives, self.total())
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    match scores.iter().position(|s| !s.is_finite()) {
        Some(index) => Err(MetricsError::NonFiniteScore { index }),
        None => Ok(()),
    }
}

pub fn confusion_matrix(scores: &[f64], labels: &[Label], threshold: f64) -> Result<ConfusionMatrix, MetricsError> {
    check_inputs(scores, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&s, &l) in scores.iter().zip(labels) {
        cm.record(s >= threshold, l);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
    pub accuracy: f64,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics, MetricsError> {
    let accuracy = cm.accuracy().ok_or(MetricsError::EmptyInput)?;
    Ok(ClassificationMetrics { precision: cm.precision(), recall: cm.recall(), f_score: cm.f_score(), accuracy })
}

/// ROC points as (false-positive rate, true-positive rate), from (0,0) to (1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    (positives, labels.len() - positives)
}

/// Sweeps the threshold down through every distinct score; tied scores
/// enter together as a single step.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<RocCurve, MetricsError> {
    check_inputs(scores, labels)?;
    let (positives, negatives) = class_counts(labels);
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(scores.len() + 2);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            match labels[order[i]] {
                Label::Positive => tp += 1,
                Label::Negative => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc_trapezoid(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Mann-Whitney estimate: the fraction of (positive, negative) pairs in
/// which the positive scores higher, ties counting one half. Quadratic.
pub fn auc_rank_oracle(scores: &[f64], labels: &[Label]) -> Result<f64, MetricsError> {
    check_inputs(scores, labels)?;
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| l.is_positive()).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| !l.is_positive()).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::SingleClass);
    }
    // count in half-units so the sum stays an exact integer
    let mut halves = 0u64;
    for p in &pos {
        for n in &neg {
            halves += match p.total_cmp(n) {
                core::cmp::Ordering::Greater => 2,
                core::cmp::Ordering::Equal => 1,
                core::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(halves as f64 / (2 * pos.len() * neg.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub threshold: f64,
}

impl EvalReport {
    pub fn from_scores(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Self, MetricsError> {
        let confusion = confusion_matrix(scores, labels, threshold)?;
        let m = classification_metrics(&confusion)?;
        let auc = match roc_curve(scores, labels) {
            Ok(curve) => Some(auc_trapezoid(&curve)),
            Err(MetricsError::SingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            auc,
            precision: m.precision,
            recall: m.recall,
            f_score: m.f_score,
            accuracy: m.accuracy,
            confusion,
            threshold,
        })
    }
}

/// Inference-mode probabilities for every example, in order.
pub fn scores(params: &HeadParams, examples: &[LabeledExample]) -> Result<Vec<f64>, MetricsError> {
    examples
        .iter()
        .map(|ex| predict(params, &ex.embedding).map_err(MetricsError::from))
        .collect()
}

pub fn evaluate(params: &HeadParams, examples: &[LabeledExample], threshold: f64) -> Result<EvalReport, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let s = scores(params, examples)?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    EvalReport::from_scores(&s, &labels, threshold)
}
