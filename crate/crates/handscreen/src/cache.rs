//! On-disk embedding cache.
//!
//! Layout (little-endian):
//!
//! | field              | size                          |
//! |--------------------|-------------------------------|
//! | magic `SGEMB1`     | 6                             |
//! | backbone digest    | 32                            |
//! | normalization id   | u16 length + UTF-8            |
//! | record count       | u64                           |
//! | per record         | 32-byte image digest, 1 tag byte, 1280 x f64 |
//!
//! The tag byte holds the label in bit 0 and the augmentation draw index
//! (0 for the original image) in bits 1..=7.

use std::path::Path;

use handscreen_core::{Embedding, Label, LabeledExample, EMBEDDING_DIM};

use crate::binio::{put_f64s, put_short_string, write_atomically, FormatError, Reader};

pub const MAGIC: &[u8; 6] = b"SGEMB1";
pub const MAX_AUGMENTATION: u8 = 127;
const RECORD_LEN: usize = 32 + 1 + EMBEDDING_DIM * 8;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cache file: {0}")]
    Format(#[from] FormatError),
    #[error("record {record} has a non-finite embedding value")]
    NonFinite { record: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheHeader {
    pub backbone_digest: [u8; 32],
    pub normalization_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    /// SHA-256 of the encoded source image.
    pub image_digest: [u8; 32],
    pub label: Label,
    pub augmentation: u8,
    pub embedding: Embedding,
}

impl CacheRecord {
    /// The source id is the hex image digest, so augmented copies share it
    /// with their original.
    pub fn to_example(&self) -> LabeledExample {
        LabeledExample::augmented(self.embedding.clone(), self.label, hex::encode(self.image_digest), self.augmentation)
    }
}

pub fn encode_cache(header: &CacheHeader, records: &[CacheRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + records.len() * RECORD_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header.backbone_digest);
    put_short_string(&mut out, &header.normalization_id);
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for rec in records {
        assert!(rec.augmentation <= MAX_AUGMENTATION, "augmentation index exceeds 7 bits");
        out.extend_from_slice(&rec.image_digest);
        out.push(rec.label.as_u8() | (rec.augmentation << 1));
        put_f64s(&mut out, rec.embedding.values());
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<(CacheHeader, Vec<CacheRecord>), CacheError> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len(), "file shorter than the magic")? != MAGIC {
        return Err(FormatError { offset: 0, reason: "bad magic, not an embedding cache" }.into());
    }
    let backbone_digest = r.array::<32>("truncated backbone digest")?;
    let normalization_id = r.short_string("truncated normalization id")?;
    let count = r.u64("truncated record count")?;
    if count.checked_mul(RECORD_LEN as u64) != Some(r.remaining() as u64) {
        return Err(r.error("record count disagrees with file length").into());
    }
    let mut records = Vec::with_capacity(count as usize);
    for record in 0..count as usize {
        let image_digest = r.array::<32>("truncated record")?;
        let [tag] = r.array::<1>("truncated record")?;
        let mut values = vec![0.0; EMBEDDING_DIM];
        r.f64s(&mut values, "truncated record")?;
        let embedding = Embedding::new(values).map_err(|_| CacheError::NonFinite { record })?;
        let label = if tag & 1 == 1 { Label::Positive } else { Label::Negative };
        records.push(CacheRecord { image_digest, label, augmentation: tag >> 1, embedding });
    }
    r.finish()?;
    Ok((CacheHeader { backbone_digest, normalization_id }, records))
}

pub fn write_cache(path: &Path, header: &CacheHeader, records: &[CacheRecord]) -> Result<(), CacheError> {
    write_atomically(path, &encode_cache(header, records))?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(CacheHeader, Vec<CacheRecord>), CacheError> {
    decode_cache(&std::fs::read(path)?)
}
