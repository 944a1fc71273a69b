//! Parameter updates. SGD and bias-corrected Adam over [`HeadParams`].

use crate::head::HeadParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moments: Option<(HeadParams, HeadParams)>,
}

impl OptimizerState {
    pub fn new(algorithm: Algorithm, learning_rate: f64) -> Self {
        let moments = (algorithm == Algorithm::Adam).then(|| (HeadParams::zeros(), HeadParams::zeros()));
        Self { algorithm, learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, moments }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(Algorithm::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(Algorithm::Adam, learning_rate)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// First and second Adam moments, shaped like the parameters.
    pub fn moments(&self) -> Option<&(HeadParams, HeadParams)> {
        self.moments.as_ref()
    }
}

/// Applies one update in place and advances the step counter.
pub fn apply_update(params: &mut HeadParams, grads: &HeadParams, state: &mut OptimizerState) {
    state.step += 1;
    let lr = state.learning_rate;
    match state.algorithm {
        Algorithm::Sgd => {
            for (theta, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (t, g) in theta.iter_mut().zip(g) {
                    *t -= lr * g;
                }
            }
        }
        Algorithm::Adam => {
            let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
            let t = state.step as i32;
            let c1 = 1.0 - libm::pow(b1, t as f64);
            let c2 = 1.0 - libm::pow(b2, t as f64);
            let (m, v) = state
                .moments
                .get_or_insert_with(|| (HeadParams::zeros(), HeadParams::zeros()));
            let slots = params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut());
            for (((theta, g), m), v) in slots {
                for (((t, &g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *t -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
        }
    }
}
