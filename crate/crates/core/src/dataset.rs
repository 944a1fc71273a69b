use alloc::string::String;

use crate::backbone::Embedding;

/// Binary outcome: positive means the page comes from a student with a
/// learning-disorder diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl From<bool> for Label {
    fn from(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = u8;

    fn try_from(value: u8) -> Result<Self, u8> {
        match value {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub embedding: Embedding,
    pub label: Label,
    /// Opaque identifier of the source image (or student, when grouping).
    pub source_id: String,
    /// 0 for the original image, k >= 1 for the k-th augmented copy.
    pub augmentation: u8,
}

impl LabeledExample {
    pub fn new(embedding: Embedding, label: Label, source_id: impl Into<String>) -> Self {
        Self { embedding, label, source_id: source_id.into(), augmentation: 0 }
    }

    pub fn augmented(embedding: Embedding, label: Label, source_id: impl Into<String>, draw: u8) -> Self {
        Self { embedding, label, source_id: source_id.into(), augmentation: draw }
    }

    pub fn is_original(&self) -> bool {
        self.augmentation == 0
    }
}
