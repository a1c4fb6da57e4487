use std::io::Cursor;
use std::path::Path;

use base64::Engine as _;
use image::{GenericImageView, ImageFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_MAX_SIDE: u32 = 1024;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    FileNotFound(String),
    #[error("cannot read image {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("undecodable image {path}: {reason}")]
    UndecodableImage { path: String, reason: String },
}

/// A screenshot ready to attach to a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedImage {
    pub media_type: String,
    /// SHA-256 of the original file bytes, independent of re-encoding.
    pub bytes_digest: String,
    pub payload: String,
    pub width: u32,
    pub height: u32,
}

impl EncodedImage {
    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.payload)
    }

    pub fn short_digest(&self) -> &str {
        &self.bytes_digest[..self.bytes_digest.len().min(12)]
    }
}

pub fn file_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Dimensions after proportional downscaling so the longest side fits
/// `max_side`. Never upscales.
pub fn fitted_dimensions(width: u32, height: u32, max_side: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= max_side || max_side == 0 {
        return (width, height);
    }
    let scale = |side: u32| -> u32 {
        let scaled = (side as u64 * max_side as u64 + longest as u64 / 2) / longest as u64;
        (scaled as u32).clamp(1, max_side)
    };
    (scale(width), scale(height))
}

/// Load a PNG or JPEG screenshot, downscale it if needed and base64 it.
pub fn encode_image(path: &Path, max_side: u32) -> Result<EncodedImage, ImageError> {
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ImageError::FileNotFound(shown.clone())
        } else {
            ImageError::Io {
                path: shown.clone(),
                source,
            }
        }
    })?;
    let undecodable = |reason: String| ImageError::UndecodableImage {
        path: shown.clone(),
        reason,
    };
    let format = image::guess_format(&bytes).map_err(|e| undecodable(e.to_string()))?;
    let media_type = match format {
        ImageFormat::Png => "image/png",
        ImageFormat::Jpeg => "image/jpeg",
        other => return Err(undecodable(format!("unsupported format {other:?}"))),
    };
    let decoded = image::load_from_memory_with_format(&bytes, format).map_err(|e| undecodable(e.to_string()))?;
    let (width, height) = decoded.dimensions();
    let (new_w, new_h) = fitted_dimensions(width, height, max_side);

    let engine = base64::engine::general_purpose::STANDARD;
    let payload = if (new_w, new_h) == (width, height) {
        engine.encode(&bytes)
    } else {
        let resized = decoded.resize_exact(new_w, new_h, image::imageops::FilterType::Triangle);
        let mut out = Cursor::new(Vec::new());
        match format {
            ImageFormat::Jpeg => resized
                .to_rgb8()
                .write_to(&mut out, ImageFormat::Jpeg)
                .map_err(|e| undecodable(e.to_string()))?,
            _ => resized
                .write_to(&mut out, ImageFormat::Png)
                .map_err(|e| undecodable(e.to_string()))?,
        }
        engine.encode(out.into_inner())
    };

    Ok(EncodedImage {
        media_type: media_type.to_string(),
        bytes_digest: file_digest(&bytes),
        payload,
        width: new_w,
        height: new_h,
    })
}
