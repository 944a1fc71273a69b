//! Frozen feature extractor evaluated with tract.

use std::path::{Path, PathBuf};

use handscreen_core::{Backbone, BackboneError, BackboneKind, Embedding, TensorImage, EMBEDDING_DIM, INPUT_SIZE};
use sha2::{Digest, Sha256};
use tract_onnx::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("backbone file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("backbone output has shape {found:?}, expected [1, {EMBEDDING_DIM}]")]
    Shape { found: Vec<usize> },
    #[error("cannot build backbone graph: {0}")]
    Graph(String),
}

pub struct OnnxBackbone {
    plan: Arc<TypedRunnableModel>,
    digest: [u8; 32],
}

impl std::fmt::Debug for OnnxBackbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackbone").field("digest", &hex::encode(self.digest)).finish()
    }
}

/// Loads an ONNX graph taking a `1x224x224x3` f32 tensor and checks that it
/// yields exactly 1280 values.
pub fn load_backbone(path: &Path) -> Result<OnnxBackbone, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => LoadError::FileNotFound(path.to_path_buf()),
        _ => LoadError::Io { path: path.to_path_buf(), source },
    })?;
    OnnxBackbone::from_bytes(&bytes)
}

impl OnnxBackbone {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LoadError> {
        let graph = |e: TractError| LoadError::Graph(format!("{e:#}"));
        let input = f32::fact([1, INPUT_SIZE, INPUT_SIZE, 3]);
        let model = tract_onnx::onnx()
            .model_for_read(&mut &bytes[..])
            .map_err(graph)?
            .with_input_fact(0, input.into())
            .map_err(graph)?
            .into_optimized()
            .map_err(graph)?;
        let fact = model.output_fact(0).map_err(graph)?;
        let found: Vec<usize> = match fact.shape.as_concrete() {
            Some(dims) => dims.to_vec(),
            None => return Err(LoadError::Graph(format!("output shape {:?} is not concrete", fact.shape))),
        };
        if found.iter().product::<usize>() != EMBEDDING_DIM || found.last() != Some(&EMBEDDING_DIM) {
            return Err(LoadError::Shape { found });
        }
        let plan = model.into_runnable().map_err(graph)?;
        Ok(Self { plan, digest: Sha256::digest(bytes).into() })
    }
}

impl Backbone for OnnxBackbone {
    fn kind(&self) -> BackboneKind {
        BackboneKind::OnnxModel
    }

    fn digest(&self) -> [u8; 32] {
        self.digest
    }

    fn embed(&self, tensor: &TensorImage) -> Result<Embedding, BackboneError> {
        let fail = |e: TractError| BackboneError::Inference(format!("{e:#}"));
        let input = tract_ndarray::Array4::from_shape_vec((1, INPUT_SIZE, INPUT_SIZE, 3), tensor.values().to_vec())
            .expect("tensor image has the input shape");
        let outputs = self.plan.run(tvec!(Tensor::from(input).into())).map_err(fail)?;
        let view = outputs[0].to_plain_array_view::<f32>().map_err(fail)?;
        Embedding::new(view.iter().map(|&v| v as f64).collect())
    }
}
