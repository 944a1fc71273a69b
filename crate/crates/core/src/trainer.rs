//! Dataset splitting, the mini-batch epoch loop and best-epoch checkpointing.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::{Label, LabeledExample};
use crate::head::{accumulate_gradients, bce_loss, forward, DropoutSpec, HeadError, HeadParams};
use crate::metrics::{confusion_matrix, scores, MetricsError};
use crate::optim::{apply_update, Algorithm, OptimizerState};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("split asks for {train} + {validation} examples but the dataset has {available}")]
    SizeMismatch { train: usize, validation: usize, available: usize },
    #[error("stratification infeasible: class {label:?} has {members} member(s), cannot populate both sides")]
    Infeasible { label: Label, members: usize },
    #[error("no combination of source groups fills a validation set of exactly {0}")]
    GroupsDoNotFit(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub val_count: usize,
    pub seed: u64,
    /// Keep class proportions equal on both sides (within one example).
    pub stratified: bool,
    /// Keep all examples sharing a `source_id` on the same side. Counts
    /// then still refer to original examples; stratification is not applied.
    pub group_by_source: bool,
}

impl SplitSpec {
    pub fn new(train_count: usize, val_count: usize, seed: u64) -> Self {
        Self { train_count, val_count, seed, stratified: true, group_by_source: false }
    }
}

/// Partitions the original (non-augmented) examples into training and
/// validation sets of exactly the requested sizes.
///
/// Augmented copies never reach validation: each joins the training set
/// when no original with its `source_id` went to validation, and is
/// dropped otherwise. Both outputs keep the input order.
pub fn split_dataset(
    examples: &[LabeledExample],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), SplitError> {
    let originals: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].is_original()).collect();
    let available = originals.len();
    if spec.train_count + spec.val_count != available {
        return Err(SplitError::SizeMismatch { train: spec.train_count, validation: spec.val_count, available });
    }
    let mut rng = seeded(spec.seed);

    let validation: BTreeSet<usize> = if spec.group_by_source {
        let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
        for &i in &originals {
            let id = examples[i].source_id.as_str();
            match groups.iter_mut().find(|(g, _)| *g == id) {
                Some((_, members)) => members.push(i),
                None => groups.push((id, vec![i])),
            }
        }
        groups.shuffle(&mut rng);
        let mut chosen = BTreeSet::new();
        for (_, members) in &groups {
            if chosen.len() + members.len() <= spec.val_count {
                chosen.extend(members.iter().copied());
            }
        }
        if chosen.len() != spec.val_count {
            return Err(SplitError::GroupsDoNotFit(spec.val_count));
        }
        chosen
    } else if spec.stratified {
        let mut by_class: Vec<(Label, Vec<usize>)> = [Label::Negative, Label::Positive]
            .into_iter()
            .map(|label| (label, originals.iter().copied().filter(|&i| examples[i].label == label).collect()))
            .filter(|(_, members): &(Label, Vec<usize>)| !members.is_empty())
            .collect();
        let quotas = stratified_quotas(&by_class, spec.val_count, available)?;
        let mut chosen = BTreeSet::new();
        for ((_, members), quota) in by_class.iter_mut().zip(quotas) {
            members.shuffle(&mut rng);
            chosen.extend(members[..quota].iter().copied());
        }
        chosen
    } else {
        let mut shuffled = originals.clone();
        shuffled.shuffle(&mut rng);
        shuffled[..spec.val_count].iter().copied().collect()
    };

    let held_out: BTreeSet<&str> = validation.iter().map(|&i| examples[i].source_id.as_str()).collect();
    let mut train = Vec::with_capacity(examples.len() - validation.len());
    let mut val = Vec::with_capacity(validation.len());
    for (i, ex) in examples.iter().enumerate() {
        if validation.contains(&i) {
            val.push(ex.clone());
        } else if ex.is_original() || !held_out.contains(ex.source_id.as_str()) {
            train.push(ex.clone());
        }
    }
    Ok((train, val))
}

/// Largest-remainder allocation of validation slots per class, then nudged
/// so every class keeps at least one member on each side.
fn stratified_quotas(classes: &[(Label, Vec<usize>)], val_count: usize, total: usize) -> Result<Vec<usize>, SplitError> {
    let exact: Vec<f64> = classes
        .iter()
        .map(|(_, m)| m.len() as f64 * val_count as f64 / total as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| libm::floor(*x) as usize).collect();
    let mut by_remainder: Vec<usize> = (0..classes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - quotas[a] as f64;
        let rb = exact[b] - quotas[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = val_count - quotas.iter().sum::<usize>();
    for &c in by_remainder.iter().cycle() {
        if missing == 0 {
            break;
        }
        quotas[c] += 1;
        missing -= 1;
    }

    for c in 0..classes.len() {
        let (label, members) = (classes[c].0, classes[c].1.len());
        if members < 2 {
            return Err(SplitError::Infeasible { label, members });
        }
        if quotas[c] == 0 {
            let donor = (0..classes.len()).filter(|&d| d != c && quotas[d] >= 2).max_by_key(|&d| quotas[d]);
            let d = donor.ok_or(SplitError::Infeasible { label, members })?;
            quotas[d] -= 1;
            quotas[c] += 1;
        } else if quotas[c] == members {
            let receiver = (0..classes.len()).find(|&d| d != c && quotas[d] + 1 < classes[d].1.len());
            let d = receiver.ok_or(SplitError::Infeasible { label, members })?;
            quotas[d] += 1;
            quotas[c] -= 1;
        }
    }
    Ok(quotas)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// Augmented copies extracted per training image.
    pub augment_multiplier: usize,
    /// Decision threshold used for training and validation accuracy.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 32,
            dropout_rate: DropoutSpec::DEFAULT_RATE,
            algorithm: Algorithm::Adam,
            learning_rate: 1e-3,
            augment_multiplier: 4,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> OptimizerState {
        OptimizerState::new(self.algorithm, self.learning_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Earliest epoch with the highest validation accuracy.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_accuracy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub params: HeadParams,
    pub history: TrainHistory,
}

/// Seeded shuffle of `0..n` cut into consecutive batches; the last batch
/// may be short.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// One pass over `train`: forward/backward per example with batch-averaged
/// gradients and one optimizer update per batch.
pub fn train_epoch(
    params: &mut HeadParams,
    state: &mut OptimizerState,
    train: &[LabeledExample],
    cfg: &TrainConfig,
    epoch_seed: u64,
) -> Result<EpochStats, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch size must be at least 1"));
    }
    let dropout = DropoutSpec::train(cfg.dropout_rate)?;
    let batches = epoch_batches(train.len(), cfg.batch_size, derive_seed(epoch_seed, u64::MAX));

    let mut grads = HeadParams::zeros();
    let (mut loss_sum, mut correct, mut visit) = (0.0, 0usize, 0u64);
    for batch in &batches {
        grads.fill(0.0);
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let ex = &train[i];
            let (p, trace) = forward(params, &ex.embedding, &dropout, derive_seed(epoch_seed, visit))?;
            visit += 1;
            loss_sum += bce_loss(p, ex.label);
            correct += usize::from((p >= cfg.threshold) == ex.label.is_positive());
            accumulate_gradients(params, &trace, ex.label, scale, &mut grads)?;
        }
        apply_update(params, &grads, state);
    }
    if !params.is_finite() {
        return Err(HeadError::Numeric { stage: "parameter update" }.into());
    }
    Ok(EpochStats {
        mean_loss: loss_sum / train.len() as f64,
        train_accuracy: correct as f64 / train.len() as f64,
        updates: batches.len(),
    })
}

/// Inference-mode accuracy at `threshold`.
pub fn accuracy(params: &HeadParams, examples: &[LabeledExample], threshold: f64) -> Result<f64, TrainError> {
    let s = scores(params, examples)?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let cm = confusion_matrix(&s, &labels, threshold)?;
    Ok(cm.accuracy().unwrap_or(0.0))
}

/// Splits, trains for `cfg.epochs` epochs and returns the parameters of
/// the epoch with the best validation accuracy (earliest on ties).
pub fn fit(dataset: &[LabeledExample], spec: &SplitSpec, cfg: &TrainConfig) -> Result<FitOutcome, TrainError> {
    let (train, validation) = split_dataset(dataset, spec)?;
    fit_presplit(&train, &validation, cfg)
}

pub fn fit_presplit(
    train: &[LabeledExample],
    validation: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<FitOutcome, TrainError> {
    let mut params = HeadParams::init(derive_seed(cfg.seed, 0));
    if cfg.epochs == 0 {
        return Ok(FitOutcome { params, history: TrainHistory::default() });
    }
    if validation.is_empty() {
        return Err(TrainError::EmptyValidationSet);
    }
    let mut state = cfg.optimizer();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, HeadParams)> = None;
    for epoch in 0..cfg.epochs {
        let stats = train_epoch(&mut params, &mut state, train, cfg, derive_seed(cfg.seed, epoch as u64 + 1))?;
        let val_accuracy = accuracy(&params, validation, cfg.threshold)?;
        history.epochs.push(EpochRecord { mean_loss: stats.mean_loss, train_accuracy: stats.train_accuracy, val_accuracy });
        if best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, params.clone()));
            history.best_epoch = Some(epoch);
        }
    }
    let (_, params) = best.expect("at least one epoch ran");
    Ok(FitOutcome { params, history })
}

/// Readable identifier for examples built in memory.
pub fn synthetic_source_id(index: usize) -> String {
    alloc::format!("example-{index:05}")
}
