//! Images + labels CSV -> embedding cache records.

use std::path::{Path, PathBuf};

use handscreen_core::rng::derive_seed;
use handscreen_core::{augment, preprocess, AugmentSpec, Backbone, BackboneError, Label};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cache::{CacheRecord, MAX_AUGMENTATION};
use crate::decode::{decode_image, DecodeError};

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("labels file: {0}")]
    Csv(#[from] csv::Error),
    #[error("labels file must start with the header \"filename,label\", found {0:?}")]
    Header(String),
    #[error("labels file line {line}: label {value:?} is not 0 or 1")]
    Label { line: u64, value: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Decode { path: PathBuf, source: DecodeError },
    #[error("{path}: {source}")]
    Embed { path: PathBuf, source: BackboneError },
    #[error("at most {MAX_AUGMENTATION} augmented copies per image, asked for {0}")]
    TooManyAugmentations(usize),
}

/// Failure while processing a single image.
#[derive(Debug, thiserror::Error)]
pub enum ImageFailure {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Embed(#[from] BackboneError),
    #[error("at most {MAX_AUGMENTATION} augmented copies per image, asked for {0}")]
    TooManyAugmentations(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub filename: String,
    pub label: Label,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>, ExtractError> {
    let file = std::fs::File::open(path).map_err(|source| ExtractError::Io { path: path.to_path_buf(), source })?;
    parse_labels(file)
}

pub fn parse_labels<R: std::io::Read>(input: R) -> Result<Vec<LabelRow>, ExtractError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["filename", "label"] {
        return Err(ExtractError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let label = match &record[1] {
            "0" => Label::Negative,
            "1" => Label::Positive,
            other => return Err(ExtractError::Label { line, value: other.to_string() }),
        };
        rows.push(LabelRow { filename: record[0].to_string(), label });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    /// Augmented copies per image, in addition to the original.
    pub augment: usize,
    pub seed: u64,
    pub spec: AugmentSpec,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { augment: 0, seed: 0, spec: AugmentSpec::default() }
    }
}

/// Embeds one encoded image and its augmented copies. Augmentation seeds
/// depend on the image content, so results do not depend on file order.
pub fn embed_image(bytes: &[u8], label: Label, backbone: &dyn Backbone, cfg: &ExtractConfig) -> Result<Vec<CacheRecord>, ImageFailure> {
    if cfg.augment > MAX_AUGMENTATION as usize {
        return Err(ImageFailure::TooManyAugmentations(cfg.augment));
    }
    let image_digest: [u8; 32] = Sha256::digest(bytes).into();
    let raster = decode_image(bytes)?;
    let image_seed = derive_seed(cfg.seed, u64::from_le_bytes(image_digest[..8].try_into().expect("8 bytes")));
    (0..=cfg.augment as u8)
        .map(|k| {
            let img = if k == 0 { raster.clone() } else { augment(&raster, &cfg.spec, derive_seed(image_seed, k as u64)) };
            let embedding = backbone.embed(&preprocess(&img))?;
            Ok(CacheRecord { image_digest, label, augmentation: k, embedding })
        })
        .collect()
}

/// Processes every labelled image under `dir` in parallel. Records come out
/// in CSV order, each original followed by its augmented copies.
pub fn extract(dir: &Path, rows: &[LabelRow], backbone: &dyn Backbone, cfg: &ExtractConfig) -> Result<Vec<CacheRecord>, ExtractError> {
    let per_image: Vec<Result<Vec<CacheRecord>, ExtractError>> = rows
        .par_iter()
        .map(|row| {
            let path = dir.join(&row.filename);
            let bytes = std::fs::read(&path).map_err(|source| ExtractError::Io { path: path.clone(), source })?;
            embed_image(&bytes, row.label, backbone, cfg).map_err(|e| match e {
                ImageFailure::Decode(source) => ExtractError::Decode { path, source },
                ImageFailure::Embed(source) => ExtractError::Embed { path, source },
                ImageFailure::TooManyAugmentations(n) => ExtractError::TooManyAugmentations(n),
            })
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len() * (cfg.augment + 1));
    for records in per_image {
        out.extend(records?);
    }
    Ok(out)
}
