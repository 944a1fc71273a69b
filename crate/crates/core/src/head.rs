//! The trainable classifier head: Dense 1280→800→400→200 with ReLU and
//! inverted dropout after each hidden layer, then a single sigmoid unit.
//!
//! All arithmetic is `f64`. Gradients use the same container as the
//! parameters ([`HeadParams`]) so optimizers can zip them slot by slot.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::backbone::{Embedding, EMBEDDING_DIM};
use crate::dataset::Label;
use crate::rng::{seeded, standard_normal};

/// `(outputs, inputs)` of each dense layer, input side first.
pub const LAYER_SHAPES: [(usize, usize); 4] = [(800, EMBEDDING_DIM), (400, 800), (200, 400), (1, 200)];
pub const HIDDEN_LAYERS: usize = 3;

/// Probability clamp used by [`bce_loss`].
pub const LOSS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeadError {
    #[error("non-finite value in {stage}")]
    Numeric { stage: &'static str },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("layer {layer} has shape {found:?}, expected {expected:?}")]
    Shape {
        layer: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// One fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    outputs: usize,
    inputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self { outputs, inputs, weights: vec![0.0; outputs * inputs], bias: vec![0.0; outputs] }
    }

    /// Layer from explicit row-major weights; shape consistency is checked
    /// by [`HeadParams::from_layers`].
    pub fn new(outputs: usize, inputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        Self { outputs, inputs, weights, bias }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.outputs, self.inputs)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Per-layer and total trainable parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub per_layer: [usize; 4],
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    layers: [Dense; 4],
}

impl HeadParams {
    pub fn zeros() -> Self {
        Self { layers: LAYER_SHAPES.map(|(o, i)| Dense::zeros(o, i)) }
    }

    /// He-normal weights (variance 2/fan_in) for the ReLU layers, variance
    /// 1/fan_in for the sigmoid output, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut params = Self::zeros();
        for (k, layer) in params.layers.iter_mut().enumerate() {
            let gain = if k < HIDDEN_LAYERS { 2.0 } else { 1.0 };
            let std = libm::sqrt(gain / layer.inputs as f64);
            layer.weights.iter_mut().for_each(|w| *w = std * standard_normal(&mut rng));
        }
        params
    }

    /// Builds parameters from explicit layers, rejecting any shape that
    /// deviates from [`LAYER_SHAPES`].
    pub fn from_layers(layers: [Dense; 4]) -> Result<Self, HeadError> {
        for (k, (layer, expected)) in layers.iter().zip(LAYER_SHAPES).enumerate() {
            let found = layer.shape();
            let consistent = layer.weights.len() == found.0 * found.1 && layer.bias.len() == found.0;
            if found != expected || !consistent {
                return Err(HeadError::Shape { layer: k, expected, found });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense; 4] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense; 4] {
        &mut self.layers
    }

    pub fn param_count(&self) -> ParamCount {
        let per_layer = [0, 1, 2, 3].map(|k| self.layers[k].param_count());
        ParamCount { per_layer, total: per_layer.iter().sum() }
    }

    /// The eight parameter tensors in storage order: W1, b1, W2, b2, W3, b3, W4, b4.
    pub fn tensors(&self) -> [&[f64]; 8] {
        let [l1, l2, l3, l4] = &self.layers;
        [&l1.weights, &l1.bias, &l2.weights, &l2.bias, &l3.weights, &l3.bias, &l4.weights, &l4.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        let [l1, l2, l3, l4] = &mut self.layers;
        [
            &mut l1.weights,
            &mut l1.bias,
            &mut l2.weights,
            &mut l2.bias,
            &mut l3.weights,
            &mut l3.bias,
            &mut l4.weights,
            &mut l4.bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    rate: f64,
    mode: DropoutMode,
}

impl DropoutSpec {
    pub const DEFAULT_RATE: f64 = 0.5;

    pub fn new(rate: f64, mode: DropoutMode) -> Result<Self, HeadError> {
        if (0.0..1.0).contains(&rate) {
            Ok(Self { rate, mode })
        } else {
            Err(HeadError::DropoutRate(rate))
        }
    }

    pub fn train(rate: f64) -> Result<Self, HeadError> {
        Self::new(rate, DropoutMode::Train)
    }

    pub fn inference() -> Self {
        Self { rate: 0.0, mode: DropoutMode::Inference }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mode(&self) -> DropoutMode {
        self.mode
    }
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Hidden pre-activations, one vector per hidden layer.
    pub pre_activations: [Vec<f64>; HIDDEN_LAYERS],
    /// Hidden outputs after ReLU and dropout.
    pub activations: [Vec<f64>; HIDDEN_LAYERS],
    /// Inverted-dropout masks (entries 0 or 1/(1-rate)); `None` in inference mode.
    pub masks: Option<[Vec<f64>; HIDDEN_LAYERS]>,
    pub logit: f64,
    pub probability: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Inference-mode probability without keeping a trace.
pub fn predict(params: &HeadParams, embedding: &Embedding) -> Result<f64, HeadError> {
    forward(params, embedding, &DropoutSpec::inference(), 0).map(|(p, _)| p)
}

/// Evaluates the head. In train mode a fresh inverted-dropout mask, drawn
/// from `seed`, follows every hidden ReLU; inference mode is mask-free and
/// ignores the seed.
pub fn forward(
    params: &HeadParams,
    embedding: &Embedding,
    dropout: &DropoutSpec,
    seed: u64,
) -> Result<(f64, ForwardTrace), HeadError> {
    let mut rng = (dropout.mode == DropoutMode::Train).then(|| seeded(seed));
    let keep_scale = 1.0 / (1.0 - dropout.rate);

    let input = embedding.values().to_vec();
    let mut pre_activations: [Vec<f64>; HIDDEN_LAYERS] = Default::default();
    let mut activations: [Vec<f64>; HIDDEN_LAYERS] = Default::default();
    let mut masks: [Vec<f64>; HIDDEN_LAYERS] = Default::default();

    for k in 0..HIDDEN_LAYERS {
        let x = if k == 0 { &input } else { &activations[k - 1] };
        let z = params.layers[k].affine(x);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(HeadError::Numeric { stage: "hidden pre-activation" });
        }
        let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
        if let Some(rng) = rng.as_mut() {
            let mask: Vec<f64> = (0..a.len())
                .map(|_| if rng.random::<f64>() < dropout.rate { 0.0 } else { keep_scale })
                .collect();
            a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
            masks[k] = mask;
        }
        pre_activations[k] = z;
        activations[k] = a;
    }

    let logit = params.layers[3].affine(&activations[HIDDEN_LAYERS - 1])[0];
    if !logit.is_finite() {
        return Err(HeadError::Numeric { stage: "logit" });
    }
    // keep the probability strictly inside (0, 1) even when exp saturates
    let probability = sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    let trace = ForwardTrace {
        input,
        pre_activations,
        activations,
        masks: rng.is_some().then_some(masks),
        logit,
        probability,
    };
    Ok((probability, trace))
}

/// Binary cross-entropy with the probability clamped to [1e-12, 1 - 1e-12].
pub fn bce_loss(probability: f64, label: Label) -> f64 {
    let p = probability.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    match label {
        Label::Positive => -libm::log(p),
        Label::Negative => -libm::log(1.0 - p),
    }
}

/// Exact gradient of `bce_loss(forward(..))` with respect to every parameter,
/// reusing the dropout masks recorded in `trace`.
pub fn backward(params: &HeadParams, trace: &ForwardTrace, label: Label) -> Result<HeadParams, HeadError> {
    let mut grads = HeadParams::zeros();
    accumulate_gradients(params, trace, label, 1.0, &mut grads)?;
    if !grads.is_finite() {
        return Err(HeadError::Numeric { stage: "gradient" });
    }
    Ok(grads)
}

/// Adds `scale * ∂loss/∂θ` into `grads`. Used by the trainer to average a
/// batch without allocating a gradient container per example.
pub fn accumulate_gradients(
    params: &HeadParams,
    trace: &ForwardTrace,
    label: Label,
    scale: f64,
    grads: &mut HeadParams,
) -> Result<(), HeadError> {
    // σ'(z)·∂BCE/∂p collapses to p - y
    let mut delta = vec![(trace.probability - label.as_f64()) * scale];
    for k in (0..=HIDDEN_LAYERS).rev() {
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(HeadError::Numeric { stage: "gradient" });
        }
        let layer = &params.layers[k];
        let x = if k == 0 { &trace.input } else { &trace.activations[k - 1] };
        let g = &mut grads.layers[k];
        for (i, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(d, x, &mut g.weights[i * layer.inputs..(i + 1) * layer.inputs]);
                g.bias[i] += d;
            }
        }
        if k == 0 {
            break;
        }
        let mut upstream = vec![0.0; layer.inputs];
        for (i, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(d, &layer.weights[i * layer.inputs..(i + 1) * layer.inputs], &mut upstream);
            }
        }
        let pre = &trace.pre_activations[k - 1];
        let mask = trace.masks.as_ref().map(|m| &m[k - 1]);
        for (j, u) in upstream.iter_mut().enumerate() {
            let gate = if pre[j] > 0.0 { mask.map_or(1.0, |m| m[j]) } else { 0.0 };
            *u *= gate;
        }
        delta = upstream;
    }
    Ok(())
}
