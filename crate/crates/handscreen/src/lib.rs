//! Standard-library side of the handwriting screening toolkit: image
//! decoding, the ONNX-backed backbone, the embedding cache and model file
//! formats, and the screening service.

pub mod artifact;
pub mod backbones;
mod binio;
pub mod cache;
pub mod decode;
pub mod extract;
pub mod onnx;
pub mod report;
pub mod screening;
pub mod service;

pub use artifact::{load_model, save_model, ArtifactError, ArtifactMeta, ModelArtifact};
pub use backbones::open_backbone;
pub use binio::FormatError;
pub use decode::{decode_image, DecodeError};
pub use onnx::{load_backbone, LoadError, OnnxBackbone};
pub use screening::{run_screening, ScreeningError, ScreeningResult, Verdict};
