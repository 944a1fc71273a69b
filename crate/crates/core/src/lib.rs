//! Core of the handwriting screening toolkit.
//!
//! Everything here is pure computation over in-memory buffers and builds
//! without `std`: raster preprocessing and augmentation, the frozen
//! backbone interface (with a deterministic mock), the trainable dense
//! head with exact backpropagation, the training loop with checkpoint
//! selection, and the evaluation metrics. Decoding, ONNX inference, file
//! formats, the CLI and the HTTP service live in the `handscreen` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod backbone;
pub mod dataset;
pub mod head;
pub mod image;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod trainer;

pub use augment::{augment, AugmentSpec, Interval};
pub use backbone::{embed_batch, make_mock_backbone, Backbone, BackboneError, BackboneKind, Embedding, MockBackbone, EMBEDDING_DIM};
pub use dataset::{Label, LabeledExample};
pub use head::{backward, bce_loss, forward, DropoutMode, DropoutSpec, ForwardTrace, HeadError, HeadParams, ParamCount};
pub use image::{preprocess, ImageError, RasterImage, TensorImage, INPUT_SIZE, NORMALIZATION_ID};
pub use metrics::{evaluate, ConfusionMatrix, EvalReport, MetricsError, RocCurve};
pub use optim::{apply_update, Algorithm, OptimizerState};
pub use trainer::{fit, split_dataset, train_epoch, SplitSpec, TrainConfig, TrainError, TrainHistory};
