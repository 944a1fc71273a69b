//! Seeded, label-preserving augmentation for handwriting scans.
//!
//! One draw per call of each transform family: rotation about the image
//! centre, translation, additive brightness and contrast around mid-grey.
//! Flips are deliberately absent because stroke orientation carries meaning.
//! Exposed canvas is filled with white.

use alloc::vec::Vec;

use rand::Rng;

use crate::image::{RasterImage, CHANNELS};
use crate::rng::{seeded, uniform};

const FILL: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("invalid interval [{lo}, {hi}]")]
pub struct IntervalError {
    pub lo: f64,
    pub hi: f64,
}

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError { lo, hi })
        }
    }

    pub fn point(value: f64) -> Result<Self, IntervalError> {
        Self::new(value, value)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Rotation angle in degrees.
    pub rotation_degrees: Interval,
    /// Shift magnitude as a fraction of the image side; the sign of each
    /// axis is drawn separately.
    pub translate_fraction: Interval,
    /// Additive offset in 8-bit units.
    pub brightness_delta: Interval,
    /// Multiplicative contrast around 127.5.
    pub contrast_factor: Interval,
    pub enabled: bool,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotation_degrees: Interval { lo: -5.0, hi: 5.0 },
            translate_fraction: Interval { lo: 0.0, hi: 0.05 },
            brightness_delta: Interval { lo: -20.0, hi: 20.0 },
            contrast_factor: Interval { lo: 0.9, hi: 1.1 },
            enabled: true,
        }
    }
}

impl AugmentSpec {
    /// Every interval pinned at its no-op value.
    pub fn identity() -> Self {
        Self {
            rotation_degrees: Interval { lo: 0.0, hi: 0.0 },
            translate_fraction: Interval { lo: 0.0, hi: 0.0 },
            brightness_delta: Interval { lo: 0.0, hi: 0.0 },
            contrast_factor: Interval { lo: 1.0, hi: 1.0 },
            enabled: true,
        }
    }
}

/// The concrete parameters drawn for one augmentation call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub angle_degrees: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl AugmentDraw {
    pub fn sample(spec: &AugmentSpec, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let angle_degrees = uniform(&mut rng, spec.rotation_degrees.lo, spec.rotation_degrees.hi);
        let shift = |rng: &mut crate::rng::SeededRng| {
            let magnitude = uniform(rng, spec.translate_fraction.lo, spec.translate_fraction.hi);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        };
        let shift_x = shift(&mut rng);
        let shift_y = shift(&mut rng);
        let brightness = uniform(&mut rng, spec.brightness_delta.lo, spec.brightness_delta.hi);
        let contrast = uniform(&mut rng, spec.contrast_factor.lo, spec.contrast_factor.hi);
        Self { angle_degrees, shift_x, shift_y, brightness, contrast }
    }
}

/// Applies one seeded draw from `spec`. Output dimensions always match the
/// input and values are clamped to [0, 255].
pub fn augment(img: &RasterImage, spec: &AugmentSpec, seed: u64) -> RasterImage {
    if !spec.enabled {
        return img.clone();
    }
    apply_draw(img, &AugmentDraw::sample(spec, seed))
}

pub fn apply_draw(img: &RasterImage, draw: &AugmentDraw) -> RasterImage {
    let geometric = draw.angle_degrees != 0.0 || draw.shift_x != 0.0 || draw.shift_y != 0.0;
    let mut values: Vec<f64> = if geometric {
        warp(img, draw)
    } else {
        img.pixels().iter().map(|&v| v as f64).collect()
    };
    for v in &mut values {
        *v = (*v + draw.brightness - 127.5) * draw.contrast + 127.5;
    }
    let pixels = values
        .into_iter()
        .map(|v| libm::round(v).clamp(0.0, 255.0) as u8)
        .collect();
    RasterImage::new(img.height(), img.width(), pixels).expect("dimensions preserved")
}

/// Inverse-maps every output pixel through the rotation and shift and
/// samples the source bilinearly; samples off the canvas read as white.
fn warp(img: &RasterImage, draw: &AugmentDraw) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let theta = draw.angle_degrees.to_radians();
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let tx = draw.shift_x * w as f64;
    let ty = draw.shift_y * h as f64;
    let px = img.pixels();

    let sample = |row: i64, col: i64, c: usize| -> f64 {
        if row < 0 || col < 0 || row >= h as i64 || col >= w as i64 {
            FILL
        } else {
            px[(row as usize * w + col as usize) * CHANNELS + c] as f64
        }
    };

    let mut out = Vec::with_capacity(h * w * CHANNELS);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx - tx;
            let dy = y as f64 - cy - ty;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let x0 = libm::floor(sx);
            let y0 = libm::floor(sy);
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            for c in 0..CHANNELS {
                let top = sample(y0, x0, c) * (1.0 - fx) + sample(y0, x0 + 1, c) * fx;
                let bottom = sample(y0 + 1, x0, c) * (1.0 - fx) + sample(y0 + 1, x0 + 1, c) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}
