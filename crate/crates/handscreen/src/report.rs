//! JSON forms of the evaluation and training summaries.

use handscreen_core::trainer::TrainHistory;
use handscreen_core::{ConfusionMatrix, EvalReport};
use serde::Serialize;

/// Undefined metrics (no predicted positives, single-class data, ...)
/// serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReportJson {
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
    pub accuracy: f64,
    pub threshold: f64,
    pub confusion: ConfusionJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionJson {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl From<&ConfusionMatrix> for ConfusionJson {
    fn from(cm: &ConfusionMatrix) -> Self {
        Self { tp: cm.true_positives, fp: cm.false_positives, fn_: cm.false_negatives, tn: cm.true_negatives }
    }
}

impl From<&EvalReport> for EvalReportJson {
    fn from(r: &EvalReport) -> Self {
        Self {
            auc: r.auc,
            precision: r.precision,
            recall: r.recall,
            f_score: r.f_score,
            accuracy: r.accuracy,
            threshold: r.threshold,
            confusion: (&r.confusion).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochJson {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummaryJson {
    pub model_version: String,
    /// 1-based, like `history[].epoch`.
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: Option<f64>,
    pub history: Vec<EpochJson>,
}

impl TrainSummaryJson {
    pub fn new(model_version: String, history: &TrainHistory) -> Self {
        Self {
            model_version,
            best_epoch: history.best_epoch.map(|e| e + 1),
            best_val_accuracy: history.best_val_accuracy(),
            history: history
                .epochs
                .iter()
                .enumerate()
                .map(|(i, e)| EpochJson {
                    epoch: i + 1,
                    mean_loss: e.mean_loss,
                    train_accuracy: e.train_accuracy,
                    val_accuracy: e.val_accuracy,
                })
                .collect(),
        }
    }
}
