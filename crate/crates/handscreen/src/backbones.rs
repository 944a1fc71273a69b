//! Selecting a backbone from a command-line argument.

use std::path::Path;
use std::sync::Arc;

use handscreen_core::{make_mock_backbone, Backbone};

use crate::onnx::{load_backbone, LoadError};

/// `mock:SEED` selects the seeded mock projection; anything else is read as
/// a path to an ONNX file.
pub fn open_backbone(spec: &str) -> Result<Arc<dyn Backbone>, LoadError> {
    if let Some(seed) = spec.strip_prefix("mock:") {
        let seed = seed
            .parse::<u64>()
            .map_err(|_| LoadError::Graph(format!("mock backbone seed {seed:?} is not an integer")))?;
        return Ok(Arc::new(make_mock_backbone(seed)));
    }
    Ok(Arc::new(load_backbone(Path::new(spec))?))
}
