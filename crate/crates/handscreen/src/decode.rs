//! PNG/JPEG decoding into 3-channel rasters.

use handscreen_core::RasterImage;
use image::ImageFormat;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("unsupported image format{}", .0.map(|f| format!(" {f:?}")).unwrap_or_default())]
    Unsupported(Option<ImageFormat>),
    #[error("corrupt or truncated image: {0}")]
    Corrupt(#[from] image::ImageError),
    #[error("image has zero width or height")]
    Empty,
}

/// Decodes a PNG or JPEG stream. Gray and alpha sources are reduced to RGB
/// (gray is replicated, alpha is dropped).
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, DecodeError> {
    let format = match image::guess_format(bytes) {
        Ok(f @ (ImageFormat::Png | ImageFormat::Jpeg)) => f,
        Ok(other) => return Err(DecodeError::Unsupported(Some(other))),
        Err(_) => return Err(DecodeError::Unsupported(None)),
    };
    let decoded = image::load_from_memory_with_format(bytes, format)?;
    let rgb = decoded.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    RasterImage::new(h, w, rgb.into_raw()).map_err(|_| DecodeError::Empty)
}

/// Encodes a raster as PNG; used for fixtures and round-trip checks.
pub fn encode_png(img: &RasterImage) -> Vec<u8> {
    let buffer = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .expect("raster buffer matches its dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buffer.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}
