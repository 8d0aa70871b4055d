//! Temporal motion segmentation.
//!
//! Each pixel of a frame pair is scored with a Chi-Square statistic over its
//! 3x3 luminance neighbourhood; pixels whose statistic exceeds the threshold
//! become foreground. The one-pixel border never has a full neighbourhood
//! and is always background.

use crate::error::{Error, Result};
use crate::frame_io::GrayFrame;

/// Parameters of the temporal Chi-Square test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationParams {
    /// Foreground decision threshold on the statistic.
    pub threshold: f64,
    /// Denominator stabiliser; must be positive.
    pub epsilon: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            threshold: 30.0,
            epsilon: 1.0,
        }
    }
}

/// A foreground/background mask tied to the frame it segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    frame_index: usize,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: u32, height: u32, frame_index: usize) -> BinaryMask {
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
            frame_index,
        }
    }

    /// Build a mask from row-major bits, checking the buffer size.
    pub fn from_bits(
        width: u32,
        height: u32,
        bits: Vec<bool>,
        frame_index: usize,
    ) -> Result<BinaryMask> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(Error::BufferSize {
                width,
                height,
                expected,
                got: bits.len(),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
            frame_index,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Index of the frame this mask belongs to (the later frame of the pair).
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// Row-major foreground bits.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when no pixel is foreground.
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// Chi-Square dissimilarity of two co-located 3x3 luminance patches:
/// the sum over the nine positions of `(a_i - b_i)^2 / (a_i + b_i + epsilon)`.
///
/// Symmetric in its arguments and zero exactly when the patches are
/// identical (for `epsilon > 0` and non-negative luminance).
pub fn chi_square_statistic(a: &[f64; 9], b: &[f64; 9], epsilon: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..9 {
        let diff = a[i] - b[i];
        if diff != 0.0 {
            sum += diff * diff / (a[i] + b[i] + epsilon);
        }
    }
    sum
}

/// Segment motion between two consecutive grayscale frames.
///
/// Returns the mask of the later frame: interior pixels whose neighbourhood
/// statistic strictly exceeds `params.threshold` are foreground, everything
/// else (including the one-pixel border) is background. The frames must
/// share dimensions.
pub fn motion_mask(
    prev: &GrayFrame,
    cur: &GrayFrame,
    params: &SegmentationParams,
) -> Result<BinaryMask> {
    if prev.width() != cur.width() || prev.height() != cur.height() {
        return Err(Error::DimensionMismatch {
            left_width: prev.width(),
            left_height: prev.height(),
            right_width: cur.width(),
            right_height: cur.height(),
        });
    }
    let (w, h) = (cur.width(), cur.height());
    let mut mask = BinaryMask::new(w, h, cur.index());
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let s = chi_square_statistic(&prev.patch3(x, y), &cur.patch3(x, y), params.epsilon);
            if s > params.threshold {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}
