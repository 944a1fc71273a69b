//! The frozen feature extractor interface.
//!
//! A backbone maps a [`TensorImage`] to a 1280-dimensional [`Embedding`]
//! and is never trained. Runtime-backed implementations live outside this
//! crate; [`MockBackbone`] is a deterministic stand-in used by tests and
//! synthetic runs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::image::{TensorImage, CHANNELS, INPUT_SIZE};
use crate::rng::{seeded, standard_normal};

pub const EMBEDDING_DIM: usize = 1280;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackboneError {
    #[error("embedding has {0} values, expected 1280")]
    Dimension(usize),
    #[error("embedding value {index} is not finite")]
    NonFinite { index: usize },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("inference failed on batch element {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: alloc::boxed::Box<BackboneError>,
    },
}

/// A validated 1280-vector of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, BackboneError> {
        if values.len() != EMBEDDING_DIM {
            return Err(BackboneError::Dimension(values.len()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(BackboneError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackboneKind {
    OnnxModel,
    Mock,
}

pub trait Backbone: Send + Sync {
    fn kind(&self) -> BackboneKind;

    /// Content digest identifying the exact feature space.
    fn digest(&self) -> [u8; 32];

    fn output_dim(&self) -> usize {
        EMBEDDING_DIM
    }

    fn model_version(&self) -> String {
        hex::encode(self.digest())
    }

    fn embed(&self, tensor: &TensorImage) -> Result<Embedding, BackboneError>;
}

impl<B: Backbone + ?Sized> Backbone for alloc::sync::Arc<B> {
    fn kind(&self) -> BackboneKind {
        (**self).kind()
    }
    fn digest(&self) -> [u8; 32] {
        (**self).digest()
    }
    fn model_version(&self) -> String {
        (**self).model_version()
    }
    fn embed(&self, tensor: &TensorImage) -> Result<Embedding, BackboneError> {
        (**self).embed(tensor)
    }
}

/// Embeds every tensor in order; the first failure is reported with its index.
pub fn embed_batch<B: Backbone + ?Sized>(backbone: &B, tensors: &[TensorImage]) -> Result<Vec<Embedding>, BackboneError> {
    tensors
        .iter()
        .enumerate()
        .map(|(index, t)| {
            backbone
                .embed(t)
                .map_err(|e| BackboneError::Batch { index, source: alloc::boxed::Box::new(e) })
        })
        .collect()
}

const POOL_GRID: usize = 14;
const POOL_CELL: usize = INPUT_SIZE / POOL_GRID;
const POOLED_LEN: usize = POOL_GRID * POOL_GRID * CHANNELS;

/// Seeded random linear projection followed by `tanh`.
///
/// The projection is factored as 16x16 average pooling (588 features)
/// followed by a dense Gaussian matrix, which keeps it a linear map of the
/// flattened input without materialising a 150528x1280 matrix.
#[derive(Debug, Clone)]
pub struct MockBackbone {
    seed: u64,
    weights: Vec<f64>,
    bias: Vec<f64>,
    digest: [u8; 32],
}

pub fn make_mock_backbone(seed: u64) -> MockBackbone {
    let mut rng = seeded(seed);
    let scale = 1.0 / libm::sqrt(POOLED_LEN as f64);
    let weights = (0..EMBEDDING_DIM * POOLED_LEN).map(|_| standard_normal(&mut rng) * scale).collect();
    let bias = (0..EMBEDDING_DIM).map(|_| 0.1 * standard_normal(&mut rng)).collect();
    let mut hasher = Sha256::new();
    hasher.update(b"handscreen-mock-backbone");
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize().into();
    MockBackbone { seed, weights, bias, digest }
}

impl MockBackbone {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn pool(tensor: &TensorImage) -> Vec<f64> {
        let values = tensor.values();
        let mut pooled = alloc::vec![0.0f64; POOLED_LEN];
        for row in 0..INPUT_SIZE {
            let cell_row = row / POOL_CELL;
            for col in 0..INPUT_SIZE {
                let cell = (cell_row * POOL_GRID + col / POOL_CELL) * CHANNELS;
                let i = (row * INPUT_SIZE + col) * CHANNELS;
                for c in 0..CHANNELS {
                    pooled[cell + c] += values[i + c] as f64;
                }
            }
        }
        let norm = (POOL_CELL * POOL_CELL) as f64;
        pooled.iter_mut().for_each(|v| *v /= norm);
        pooled
    }
}

impl Backbone for MockBackbone {
    fn kind(&self) -> BackboneKind {
        BackboneKind::Mock
    }

    fn digest(&self) -> [u8; 32] {
        self.digest
    }

    fn model_version(&self) -> String {
        format!("mock-{}", self.seed)
    }

    fn embed(&self, tensor: &TensorImage) -> Result<Embedding, BackboneError> {
        let pooled = Self::pool(tensor);
        let values = self
            .weights
            .chunks_exact(POOLED_LEN)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z: f64 = row.iter().zip(&pooled).map(|(w, x)| w * x).sum();
                libm::tanh(z + b)
            })
            .collect();
        Embedding::new(values)
    }
}
