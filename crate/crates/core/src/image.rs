//! Raster images and the fixed normalization that feeds the backbone.

use alloc::vec;
use alloc::vec::Vec;

/// Side length of the square backbone input.
pub const INPUT_SIZE: usize = 224;
pub const CHANNELS: usize = 3;

/// Identifier of the resize + scale mapping implemented by [`preprocess`].
/// Stored in model artifacts so training and inference cannot diverge.
pub const NORMALIZATION_ID: &str = "bilinear224-v/127.5-1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {height}x{width}")]
    EmptyImage { height: usize, width: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for a 3-channel image")]
    BufferLength { expected: usize, actual: usize },
}

/// Decoded 8-bit, 3-channel image stored row-major (`[row][col][channel]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage { height, width });
        }
        let expected = height * width * CHANNELS;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength { expected, actual: pixels.len() });
        }
        Ok(Self { height, width, pixels })
    }

    /// Replicates a single-channel buffer into three identical channels.
    pub fn from_gray(height: usize, width: usize, gray: &[u8]) -> Result<Self, ImageError> {
        if gray.len() != height * width {
            return Err(ImageError::BufferLength {
                expected: height * width * CHANNELS,
                actual: gray.len() * CHANNELS,
            });
        }
        let pixels = gray.iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(height, width, pixels)
    }

    /// An image where every channel of every pixel is `value`.
    pub fn filled(height: usize, width: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(height, width, vec![value; height * width * CHANNELS])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Backbone input: 224x224x3 values in [-1, 1], row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorImage {
    values: Vec<f32>,
    normalization_id: &'static str,
}

impl TensorImage {
    pub const LEN: usize = INPUT_SIZE * INPUT_SIZE * CHANNELS;

    /// Wraps raw values; `None` unless the length is exactly 224*224*3 and
    /// every value lies in [-1, 1].
    pub fn from_values(values: Vec<f32>) -> Option<Self> {
        let ok = values.len() == Self::LEN && values.iter().all(|v| (-1.0..=1.0).contains(v));
        ok.then_some(Self { values, normalization_id: NORMALIZATION_ID })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn shape(&self) -> [usize; 3] {
        [INPUT_SIZE, INPUT_SIZE, CHANNELS]
    }

    pub fn normalization_id(&self) -> &'static str {
        self.normalization_id
    }
}

/// Bilinear resize to 224x224 followed by `v / 127.5 - 1` per channel.
pub fn preprocess(img: &RasterImage) -> TensorImage {
    let resized = resize_bilinear(img, INPUT_SIZE, INPUT_SIZE);
    let values = resized
        .into_iter()
        .map(|v| (v / 127.5 - 1.0).clamp(-1.0, 1.0))
        .collect();
    TensorImage { values, normalization_id: NORMALIZATION_ID }
}

/// Half-pixel-centred bilinear resampling; output values stay in the 8-bit
/// range but are not rounded.
fn resize_bilinear(img: &RasterImage, out_h: usize, out_w: usize) -> Vec<f32> {
    let (in_h, in_w) = (img.height, img.width);
    let sy = in_h as f32 / out_h as f32;
    let sx = in_w as f32 / out_w as f32;
    let axis = |dst: usize, scale: f32, len: usize| -> (usize, usize, f32) {
        let src = ((dst as f32 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f32);
        let lo = src as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, src - lo as f32)
    };
    let cols: Vec<(usize, usize, f32)> = (0..out_w).map(|x| axis(x, sx, in_w)).collect();

    let px = &img.pixels;
    let mut out = Vec::with_capacity(out_h * out_w * CHANNELS);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, sy, in_h);
        for &(x0, x1, fx) in &cols {
            for c in 0..CHANNELS {
                let at = |r: usize, q: usize| px[(r * in_w + q) * CHANNELS + c] as f32;
                let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
                let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
                out.push(top + (bottom - top) * fy);
            }
        }
    }
    out
}
