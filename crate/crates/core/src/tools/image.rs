use std::path::Path;
use std::sync::Arc;

use image::imageops::FilterType;
use image::{DynamicImage, GenericImageView};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ToolFailure;
use crate::protocol::BoundingBox;

pub const DEFAULT_PIXEL_BUDGET: u64 = 2_000_000;
pub const DEFAULT_ZOOM_TARGET: u32 = 768;
/// Smallest clamped crop area, in presented-frame pixels, that is accepted.
pub const MIN_CROP_AREA: i64 = 16;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image has zero area")]
    ZeroArea,
    #[error("pixel budget must be at least 1")]
    ZeroBudget,
    #[error("cannot read image {path}: {source}")]
    Read { path: String, source: image::ImageError },
}

/// Dimensions of an image as presented to the model and of the source it was
/// derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    /// File path or content address of the source image.
    pub source: String,
    pub width: u32,
    pub height: u32,
    pub source_width: u32,
    pub source_height: u32,
}

impl ImageRef {
    /// Source pixels per presented pixel along the horizontal axis (≥ 1).
    pub fn scale_to_original(&self) -> f64 {
        f64::from(self.source_width) / f64::from(self.width)
    }

    pub fn scale_y(&self) -> f64 {
        f64::from(self.source_height) / f64::from(self.height)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// An image downsampled to a pixel budget, keeping the full-resolution source
/// for crops.
#[derive(Debug, Clone)]
pub struct BudgetedImage {
    pub meta: ImageRef,
    pub presented: Arc<DynamicImage>,
    pub original: Arc<DynamicImage>,
}

pub fn load_image(path: &Path) -> Result<DynamicImage, ImageError> {
    image::open(path).map_err(|source| ImageError::Read { path: path.display().to_string(), source })
}

/// Largest dimensions with area ≤ `budget` obtained by flooring both sides
/// under one common scale factor. Returns the input when already in budget.
pub fn budget_dimensions(width: u32, height: u32, budget: u64) -> Result<(u32, u32), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroArea);
    }
    if budget == 0 {
        return Err(ImageError::ZeroBudget);
    }
    let area = u64::from(width) * u64::from(height);
    if area <= budget {
        return Ok((width, height));
    }
    let mut scale = (budget as f64 / area as f64).sqrt();
    loop {
        let w = (f64::from(width) * scale).floor() as u64;
        let h = (f64::from(height) * scale).floor() as u64;
        // Extreme aspect ratios: the short side bottoms out at one pixel.
        if w == 0 {
            return Ok((1, budget.min(u64::from(height)) as u32));
        }
        if h == 0 {
            return Ok((budget.min(u64::from(width)) as u32, 1));
        }
        if w * h <= budget {
            return Ok((w as u32, h as u32));
        }
        // Only reachable through rounding of the square root.
        scale *= 1.0 - 1e-9;
    }
}

/// Downsamples `image` so its area fits `budget`, preserving aspect ratio.
pub fn downsample_to_budget(
    source: impl Into<String>,
    image: Arc<DynamicImage>,
    budget: u64,
) -> Result<BudgetedImage, ImageError> {
    let (sw, sh) = image.dimensions();
    let (w, h) = budget_dimensions(sw, sh, budget)?;
    let presented = if (w, h) == (sw, sh) {
        Arc::clone(&image)
    } else {
        Arc::new(image.resize_exact(w, h, FilterType::CatmullRom))
    };
    Ok(BudgetedImage {
        meta: ImageRef { source: source.into(), width: w, height: h, source_width: sw, source_height: sh },
        presented,
        original: image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomConfig {
    /// Longer side that small crops are magnified to.
    pub target_long_side: u32,
    pub pixel_budget: u64,
}

impl Default for ZoomConfig {
    fn default() -> Self {
        Self { target_long_side: DEFAULT_ZOOM_TARGET, pixel_budget: DEFAULT_PIXEL_BUDGET }
    }
}

/// Source-pixel rectangle `(x, y, w, h)` for a bbox given in the presented frame.
fn source_region(meta: &ImageRef, bbox: BoundingBox) -> Result<(u32, u32, u32, u32), ToolFailure> {
    if !bbox.is_ordered() {
        return Err(ToolFailure::InvalidBbox);
    }
    let (pw, ph) = (i64::from(meta.width), i64::from(meta.height));
    let x1 = bbox.x1.clamp(0, pw);
    let x2 = bbox.x2.clamp(0, pw);
    let y1 = bbox.y1.clamp(0, ph);
    let y2 = bbox.y2.clamp(0, ph);
    let area = (x2 - x1) * (y2 - y1);
    if area == 0 {
        return Err(ToolFailure::EmptyAfterClamp);
    }
    if area < MIN_CROP_AREA {
        return Err(ToolFailure::DegenerateRegion);
    }
    let (fx, fy) = (meta.scale_to_original(), meta.scale_y());
    let map = |v: i64, f: f64, limit: u32, up: bool| -> u32 {
        let s = v as f64 * f;
        let s = if up { s.ceil() } else { s.floor() };
        (s.max(0.0) as u32).min(limit)
    };
    let sx1 = map(x1, fx, meta.source_width, false);
    let sx2 = map(x2, fx, meta.source_width, true).max(sx1 + 1).min(meta.source_width);
    let sy1 = map(y1, fy, meta.source_height, false);
    let sy2 = map(y2, fy, meta.source_height, true).max(sy1 + 1).min(meta.source_height);
    Ok((sx1, sy1, sx2 - sx1, sy2 - sy1))
}

/// Crops `bbox` (presented-frame pixels, clamped to the frame) out of the
/// full-resolution source and magnifies it so its longer side reaches the zoom
/// target. Crops already larger than the target keep their source resolution.
/// The result always fits the pixel budget.
pub fn crop_and_zoom(
    image: &BudgetedImage,
    bbox: BoundingBox,
    config: &ZoomConfig,
) -> Result<BudgetedImage, ToolFailure> {
    let (x, y, w, h) = source_region(&image.meta, bbox)?;
    let region = image.original.crop_imm(x, y, w, h);
    let long = w.max(h);
    let (mut ow, mut oh) = (w, h);
    if long < config.target_long_side {
        let k = f64::from(config.target_long_side) / f64::from(long);
        ow = ((f64::from(w) * k).round() as u32).max(1);
        oh = ((f64::from(h) * k).round() as u32).max(1);
    }
    let (ow, oh) = budget_dimensions(ow, oh, config.pixel_budget)
        .map_err(|e| ToolFailure::Image(e.to_string()))?;
    let zoomed = if (ow, oh) == (w, h) { region } else { region.resize_exact(ow, oh, FilterType::CatmullRom) };
    let region_ref = format!(
        "{}#crop={},{},{},{}",
        image.meta.source, x, y, w, h
    );
    let zoomed = Arc::new(zoomed);
    Ok(BudgetedImage {
        meta: ImageRef { source: region_ref, width: ow, height: oh, source_width: w, source_height: h },
        presented: Arc::clone(&zoomed),
        original: zoomed,
    })
}
