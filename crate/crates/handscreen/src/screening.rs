//! Single-image screening: bytes in, probability and label out.

use std::time::Instant;

use handscreen_core::head::predict;
use handscreen_core::{preprocess, Backbone, BackboneError, HeadError, HeadParams, NORMALIZATION_ID};
use serde::Serialize;

use crate::artifact::ModelArtifact;
use crate::decode::{decode_image, DecodeError};

#[derive(Debug, thiserror::Error)]
pub enum ScreeningError {
    #[error("cannot decode image: {0}")]
    Decode(#[from] DecodeError),
    #[error("backbone inference failed: {0}")]
    Inference(#[from] BackboneError),
    #[error("head inference failed: {0}")]
    Head(#[from] HeadError),
    #[error("model was trained on backbone {expected} but backbone {found} is loaded")]
    BackboneMismatch { expected: String, found: String },
    #[error("model expects input normalization {0:?}, this build produces {NORMALIZATION_ID:?}")]
    Normalization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningResult {
    pub probability: f64,
    pub label: Verdict,
    pub threshold: f64,
    pub model_version: String,
    pub backbone_version: String,
    pub timing_ms: f64,
}

impl Verdict {
    pub fn at(probability: f64, threshold: f64) -> Self {
        if probability >= threshold {
            Verdict::Positive
        } else {
            Verdict::Negative
        }
    }
}

/// Checks that `backbone` is the feature space the model was trained on.
/// A mismatch is logged, or returned as an error when `strict`.
pub fn check_pairing(backbone: &dyn Backbone, model: &ModelArtifact, strict: bool) -> Result<(), ScreeningError> {
    if model.meta.normalization_id != NORMALIZATION_ID {
        return Err(ScreeningError::Normalization(model.meta.normalization_id.clone()));
    }
    if backbone.digest() != model.meta.backbone_digest {
        let err = ScreeningError::BackboneMismatch {
            expected: hex::encode(model.meta.backbone_digest),
            found: hex::encode(backbone.digest()),
        };
        if strict {
            return Err(err);
        }
        log::warn!("{err}");
    }
    Ok(())
}

/// decode -> preprocess -> embed -> inference-mode head.
pub fn screen_probability(bytes: &[u8], backbone: &dyn Backbone, params: &HeadParams) -> Result<f64, ScreeningError> {
    let raster = decode_image(bytes)?;
    let embedding = backbone.embed(&preprocess(&raster))?;
    Ok(predict(params, &embedding)?)
}

pub fn run_screening(
    bytes: &[u8],
    backbone: &dyn Backbone,
    model: &ModelArtifact,
    strict: bool,
) -> Result<ScreeningResult, ScreeningError> {
    let start = Instant::now();
    check_pairing(backbone, model, strict)?;
    let probability = screen_probability(bytes, backbone, &model.params)?;
    Ok(ScreeningResult {
        probability,
        label: Verdict::at(probability, model.meta.threshold),
        threshold: model.meta.threshold,
        model_version: model.version.clone(),
        backbone_version: backbone.model_version(),
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
