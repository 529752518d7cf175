//! Binary word images: loading, canonicalisation, diacritic stripping,
//! projection-profile segmentation and the frame/cell grid.

mod components;
mod pnm;
mod segment;

use std::path::PathBuf;

use thiserror::Error;

pub use components::{label_components, remove_diacritics, ComponentLabels};
pub use pnm::{load_image, parse_pnm, write_pgm, write_pgm_bytes};
pub use segment::{
    segment_characters, segment_characters_with_min_width, smooth_histogram, split_grid,
    vertical_projection, CellGrid, CharacterBlock, ProjectionHistogram, SegmentBounds,
};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("malformed pixel data: {0}")]
    MalformedData(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image has no foreground pixels")]
    EmptyImage,
    #[error("invalid smoothing width {width} for histogram of length {len}")]
    InvalidWidth { width: usize, len: usize },
    #[error("projection histogram has no foreground")]
    NoForeground,
    #[error("degenerate block: {0}")]
    DegenerateBlock(String),
    #[error("invalid image dimensions {width}x{height} for {len} pixels")]
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
}

/// Row-major bitmap; `true` is ink.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImagingError::InvalidDimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// All-background image. Panics on a zero dimension.
    pub fn blank(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::blank(width, height);
        for r in 0..height {
            for c in 0..width {
                img.pixels[r * width + c] = f(r, c);
            }
        }
        img
    }

    /// Builds an image from text rows where `#` (or `1`) marks ink.
    pub fn from_ascii(rows: &[&str]) -> Result<Self, ImagingError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(ImagingError::InvalidDimensions {
                    width,
                    height,
                    len: pixels.len(),
                });
            }
            pixels.extend(row.chars().map(|ch| ch == '#' || ch == '1'));
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Tight bounding box of the ink as `(row0, col0, row1, col1)`, half-open.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    bbox = Some(match bbox {
                        None => (r, c, r + 1, c + 1),
                        Some((r0, c0, r1, c1)) => {
                            (r0.min(r), c0.min(c), r1.max(r + 1), c1.max(c + 1))
                        }
                    });
                }
            }
        }
        bbox
    }

    /// Copies the half-open window `rows × cols`.
    pub fn crop(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        assert!(rows.end <= self.height && cols.end <= self.width);
        let (h, w) = (rows.len(), cols.len());
        Self::from_fn(w, h, |r, c| self.get(rows.start + r, cols.start + c))
    }

    /// Nearest-neighbour resampling to `height × width`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        Self::from_fn(width, height, |r, c| {
            let sr = r * self.height / height;
            let sc = c * self.width / width;
            self.get(sr, sc)
        })
    }

    /// 90° counter-clockwise rotation: the top row becomes the left column.
    pub fn rotate90(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| {
            self.get(c, self.width - 1 - r)
        })
    }
}

/// Crops to the ink bounding box, then rescales to `target_h × target_w`.
pub fn preprocess(
    img: &BinaryImage,
    target_h: usize,
    target_w: usize,
) -> Result<BinaryImage, ImagingError> {
    let (r0, c0, r1, c1) = img.bounding_box().ok_or(ImagingError::EmptyImage)?;
    if target_h == 0 || target_w == 0 {
        return Err(ImagingError::InvalidDimensions {
            width: target_w,
            height: target_h,
            len: 0,
        });
    }
    let cropped = img.crop(r0..r1, c0..c1);
    if cropped.height == target_h && cropped.width == target_w {
        return Ok(cropped);
    }
    Ok(cropped.resize_nearest(target_h, target_w))
}
