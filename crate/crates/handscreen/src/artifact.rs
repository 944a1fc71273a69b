//! The trained-head file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field              | size                    |
//! |--------------------|-------------------------|
//! | magic `SGHD1`      | 5                       |
//! | format version     | u32                     |
//! | backbone digest    | 32                      |
//! | normalization id   | u16 length + UTF-8      |
//! | dropout rate       | f64                     |
//! | threshold          | f64                     |
//! | layer count        | u32                     |
//! | (outputs, inputs)  | 2 x u32 per layer       |
//! | parameters         | f64 each, W1 b1 .. W4 b4 row-major |

use std::path::Path;

use handscreen_core::head::{Dense, LAYER_SHAPES};
use handscreen_core::HeadParams;
use sha2::{Digest, Sha256};

use crate::binio::{put_f64s, put_short_string, write_atomically, FormatError, Reader};

pub const MAGIC: &[u8; 5] = b"SGHD1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Format(#[from] FormatError),
    #[error("unsupported model format version {0} (this build reads {FORMAT_VERSION})")]
    Version(u32),
    #[error("layer table {found:?} does not match the head architecture {expected:?}")]
    Shape { expected: Vec<(u32, u32)>, found: Vec<(u32, u32)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactMeta {
    pub backbone_digest: [u8; 32],
    pub normalization_id: String,
    pub dropout_rate: f64,
    pub threshold: f64,
}

/// A decoded artifact plus a short content hash used as its version string.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub params: HeadParams,
    pub meta: ArtifactMeta,
    pub version: String,
}

fn expected_table() -> Vec<(u32, u32)> {
    LAYER_SHAPES.iter().map(|&(o, i)| (o as u32, i as u32)).collect()
}

/// Bytes preceding the parameter block for a given normalization id.
pub fn header_len(normalization_id: &str) -> usize {
    MAGIC.len() + 4 + 32 + 2 + normalization_id.len() + 8 + 8 + 4 + LAYER_SHAPES.len() * 8
}

pub fn encode_model(params: &HeadParams, meta: &ArtifactMeta) -> Vec<u8> {
    let total = params.param_count().total;
    let mut out = Vec::with_capacity(header_len(&meta.normalization_id) + total * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&meta.backbone_digest);
    put_short_string(&mut out, &meta.normalization_id);
    out.extend_from_slice(&meta.dropout_rate.to_le_bytes());
    out.extend_from_slice(&meta.threshold.to_le_bytes());
    out.extend_from_slice(&(LAYER_SHAPES.len() as u32).to_le_bytes());
    for layer in params.layers() {
        let (o, i) = layer.shape();
        out.extend_from_slice(&(o as u32).to_le_bytes());
        out.extend_from_slice(&(i as u32).to_le_bytes());
    }
    for tensor in params.tensors() {
        put_f64s(&mut out, tensor);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<(HeadParams, ArtifactMeta), ArtifactError> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len(), "file shorter than the magic")? != MAGIC {
        return Err(FormatError { offset: 0, reason: "bad magic, not a head model file" }.into());
    }
    let version = r.u32("truncated version")?;
    if version != FORMAT_VERSION {
        return Err(ArtifactError::Version(version));
    }
    let backbone_digest = r.array::<32>("truncated backbone digest")?;
    let normalization_id = r.short_string("truncated normalization id")?;
    let at = r.offset();
    let dropout_rate = r.f64("truncated dropout rate")?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(FormatError { offset: at, reason: "dropout rate outside [0, 1)" }.into());
    }
    let at = r.offset();
    let threshold = r.f64("truncated threshold")?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FormatError { offset: at, reason: "threshold outside [0, 1]" }.into());
    }

    let count = r.u32("truncated layer table")? as usize;
    let mut found = Vec::new();
    for _ in 0..count.min(LAYER_SHAPES.len() + 1) {
        let o = r.u32("truncated layer table")?;
        let i = r.u32("truncated layer table")?;
        found.push((o, i));
    }
    let expected = expected_table();
    if count != LAYER_SHAPES.len() || found != expected {
        return Err(ArtifactError::Shape { expected, found });
    }

    let mut layers = LAYER_SHAPES.map(|(o, i)| Dense::zeros(o, i));
    for layer in &mut layers {
        r.f64s(layer.weights_mut(), "truncated in the parameter block")?;
        r.f64s(layer.bias_mut(), "truncated in the parameter block")?;
    }
    r.finish()?;
    let params = HeadParams::from_layers(layers).expect("shapes validated against the table");
    Ok((params, ArtifactMeta { backbone_digest, normalization_id, dropout_rate, threshold }))
}

/// Short content hash of an encoded artifact.
pub fn artifact_version(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

pub fn save_model(params: &HeadParams, meta: &ArtifactMeta, path: &Path) -> Result<String, ArtifactError> {
    let bytes = encode_model(params, meta);
    write_atomically(path, &bytes)?;
    Ok(artifact_version(&bytes))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, ArtifactError> {
    let bytes = std::fs::read(path)?;
    let (params, meta) = decode_model(&bytes)?;
    Ok(ModelArtifact { params, meta, version: artifact_version(&bytes) })
}
