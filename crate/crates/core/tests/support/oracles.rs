//! Independent reference computations shared by the integration and
//! acceptance suites. Nothing here calls into the head's forward or
//! backward passes; parameters are read through the public accessors only.

#![allow(dead_code)]

use handscreen_core::head::{forward, DropoutSpec, ForwardTrace, HeadParams};
use handscreen_core::metrics::ConfusionMatrix;
use handscreen_core::rng::{seeded, standard_normal};
use handscreen_core::{backward, Embedding, Label};
use rand::Rng;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative error. Central differences at step 1e-5
/// carry ~1e-11 absolute roundoff even with a compensated reference, so
/// gradients below this scale are judged on absolute error (< 1e-10 at a
/// 1e-6 tolerance).
pub const REL_FLOOR: f64 = 1e-4;

/// row · x + b accumulated in double-double (compensated dot product), so
/// the reference's own rounding stays far below finite-difference signal.
fn naive_row(weights: &[f64], bias: &[f64], inputs: usize, row: usize, x: &[f64]) -> f64 {
    let (mut hi, mut lo) = (bias[row], 0.0);
    for j in 0..inputs {
        let w = weights[row * inputs + j];
        let p = w * x[j];
        let p_err = w.mul_add(x[j], -p);
        let s = hi + p;
        let t = s - hi;
        let s_err = (hi - (s - t)) + (p - t);
        hi = s;
        lo += s_err + p_err;
    }
    hi + lo
}

fn activate(z: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    z.iter()
        .enumerate()
        .map(|(j, &v)| if v > 0.0 { v * mask.map_or(1.0, |m| m[j]) } else { 0.0 })
        .collect()
}

/// -ln sigmoid(z) or -ln(1 - sigmoid(z)) as a softplus, without forming p.
fn naive_bce(z: f64, label: Label) -> f64 {
    let softplus = |t: f64| t.max(0.0) + (-t.abs()).exp().ln_1p();
    match label {
        Label::Positive => softplus(-z),
        Label::Negative => softplus(z),
    }
}

/// Reference network evaluation that caches every layer's pre-activation
/// so a single perturbed coordinate only recomputes what it touches.
pub struct ReferenceNet<'a> {
    pub input: &'a [f64],
    pub masks: Option<[Vec<f64>; 3]>,
    pub label: Label,
    /// Baseline pre-activations of the four layers.
    pub pre: Vec<Vec<f64>>,
}

impl<'a> ReferenceNet<'a> {
    pub fn new(params: &HeadParams, input: &'a [f64], masks: Option<[Vec<f64>; 3]>, label: Label) -> Self {
        let mut net = Self { input, masks, label, pre: Vec::new() };
        let mut x = input.to_vec();
        for (k, layer) in params.layers().iter().enumerate() {
            let (outputs, inputs) = layer.shape();
            let z: Vec<f64> = (0..outputs).map(|i| naive_row(layer.weights(), layer.bias(), inputs, i, &x)).collect();
            if k < 3 {
                x = activate(&z, net.masks.as_ref().map(|m| &m[k]));
            }
            net.pre.push(z);
        }
        net
    }

    pub fn baseline_loss(&self) -> f64 {
        naive_bce(self.pre[3][0], self.label)
    }

    fn layer_input(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            self.input.to_vec()
        } else {
            activate(&self.pre[k - 1], self.masks.as_ref().map(|m| &m[k - 1]))
        }
    }

    /// Loss when `params` (already perturbed by the caller) differs from the
    /// baseline only in row `row` of layer `layer`.
    pub fn loss_with_row_changed(&self, params: &HeadParams, layer: usize, row: usize) -> f64 {
        let l = &params.layers()[layer];
        let (_, inputs) = l.shape();
        let x = self.layer_input(layer);
        let mut z = self.pre[layer].clone();
        z[row] = naive_row(l.weights(), l.bias(), inputs, row, &x);
        for k in layer + 1..4 {
            let a = activate(&z, self.masks.as_ref().map(|m| &m[k - 1]));
            let next = &params.layers()[k];
            let (outputs, inputs) = next.shape();
            z = (0..outputs).map(|i| naive_row(next.weights(), next.bias(), inputs, i, &a)).collect();
        }
        naive_bce(z[0], self.label)
    }
}

/// One checked coordinate: tensor slot (0..8 in W1,b1,..,W4,b4 order) and flat index.
#[derive(Debug, Clone, Copy)]
pub struct Coordinate {
    pub tensor: usize,
    pub index: usize,
}

impl Coordinate {
    pub fn layer(&self) -> usize {
        self.tensor / 2
    }

    pub fn row(&self, params: &HeadParams) -> usize {
        if self.tensor % 2 == 1 {
            self.index
        } else {
            self.index / params.layers()[self.layer()].shape().1
        }
    }
}

/// Random coordinates: `per_layer` drawn uniformly from each layer's
/// weights and biases (all of them when the layer is smaller).
pub fn sample_coordinates(params: &HeadParams, per_layer: usize, seed: u64) -> Vec<Coordinate> {
    let mut rng = seeded(seed);
    let mut coords = Vec::new();
    for layer in 0..4 {
        let l = &params.layers()[layer];
        let (nw, nb) = (l.weights().len(), l.bias().len());
        let total = nw + nb;
        let picks: Vec<usize> = if total <= per_layer {
            (0..total).collect()
        } else {
            (0..per_layer).map(|_| rng.random_range(0..total)).collect()
        };
        for p in picks {
            coords.push(if p < nw {
                Coordinate { tensor: 2 * layer, index: p }
            } else {
                Coordinate { tensor: 2 * layer + 1, index: p - nw }
            });
        }
    }
    coords
}

/// Central difference of the reference loss along one coordinate.
pub fn central_difference(params: &mut HeadParams, net: &ReferenceNet, c: Coordinate) -> f64 {
    let (layer, row) = (c.layer(), c.row(params));
    let original = params.tensors()[c.tensor][c.index];
    params.tensors_mut()[c.tensor][c.index] = original + FD_STEP;
    let plus = net.loss_with_row_changed(params, layer, row);
    params.tensors_mut()[c.tensor][c.index] = original - FD_STEP;
    let minus = net.loss_with_row_changed(params, layer, row);
    params.tensors_mut()[c.tensor][c.index] = original;
    (plus - minus) / (2.0 * FD_STEP)
}

/// |a - n| / max(|a|, |n|), with an absolute floor on the denominator so
/// coordinates whose true gradient is ~0 are judged on absolute error.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}

pub struct GradientCheck {
    pub checked: usize,
    pub nonzero: usize,
    pub max_relative_error: f64,
    pub worst: Option<(Coordinate, f64, f64)>,
}

/// A randomized test instance: small-scale parameters and a Gaussian input.
pub fn random_instance(seed: u64) -> (HeadParams, Embedding, Label) {
    let params = HeadParams::init(seed);
    let mut rng = seeded(seed ^ 0xA5A5);
    let x = (0..1280).map(|_| standard_normal(&mut rng)).collect();
    let label = Label::from(seed % 2 == 0);
    (params, Embedding::new(x).unwrap(), label)
}

/// Compares `backward` against central differences of the reference net on
/// `per_layer` random coordinates per layer.
pub fn check_gradients(
    mut params: HeadParams,
    embedding: &Embedding,
    label: Label,
    dropout: DropoutSpec,
    seed: u64,
    per_layer: usize,
    floor: f64,
) -> GradientCheck {
    let (_, trace): (f64, ForwardTrace) = forward(&params, embedding, &dropout, seed).unwrap();
    let grads = backward(&params, &trace, label).unwrap();
    let net = ReferenceNet::new(&params, embedding.values(), trace.masks.clone(), label);
    let coords = sample_coordinates(&params, per_layer, seed.wrapping_add(99));
    let mut result = GradientCheck { checked: 0, nonzero: 0, max_relative_error: 0.0, worst: None };
    for c in coords {
        let analytic = grads.tensors()[c.tensor][c.index];
        let numeric = central_difference(&mut params, &net, c);
        let err = relative_error(analytic, numeric, floor);
        result.checked += 1;
        result.nonzero += usize::from(analytic != 0.0);
        if err > result.max_relative_error || result.worst.is_none() {
            result.max_relative_error = result.max_relative_error.max(err);
            result.worst = Some((c, analytic, numeric));
        }
    }
    result
}

/// Brute-force tally over raw (score, label) pairs.
pub fn brute_force_confusion(scores: &[f64], labels: &[Label], threshold: f64) -> ConfusionMatrix {
    let count = |pred: bool, truth: bool| {
        scores
            .iter()
            .zip(labels)
            .filter(|(s, l)| (**s >= threshold) == pred && l.is_positive() == truth)
            .count()
    };
    ConfusionMatrix {
        true_positives: count(true, true),
        false_positives: count(true, false),
        false_negatives: count(false, true),
        true_negatives: count(false, false),
    }
}

/// Mean layer-1 train-mode activation over `draws` dropout masks against the
/// inference-mode activation; returns ||mean - ref|| / ||ref||.
pub fn dropout_expectation_error(params: &HeadParams, embedding: &Embedding, rate: f64, draws: u64) -> f64 {
    let (_, reference) = forward(params, embedding, &DropoutSpec::inference(), 0).unwrap();
    let target = &reference.activations[0];
    let mut sum = vec![0.0; target.len()];
    let dropout = DropoutSpec::train(rate).unwrap();
    for seed in 0..draws {
        let (_, trace) = forward(params, embedding, &dropout, seed).unwrap();
        for (s, a) in sum.iter_mut().zip(&trace.activations[0]) {
            *s += a;
        }
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (s, t) in sum.iter().zip(target) {
        let mean = s / draws as f64;
        diff += (mean - t) * (mean - t);
        norm += t * t;
    }
    (diff / norm).sqrt()
}
