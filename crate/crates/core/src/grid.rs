//! Dense containers: occupancy grids, rendered images and their gradients.
//!
//! Conventions frozen across the crate:
//! * voxel layout `index(c, x, y, z) = ((c*n + x)*n + y)*n + z`,
//! * y is up, the un-rotated line of sight is +z,
//! * image `row = n-1-y`, image `col = x`, so renders come out upright,
//! * occupancies and pixels live in `[0, 1]`; gradients are unconstrained.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A C-channel cubic occupancy field with side length `n`.
///
/// Values are validated into `[0, 1]` on construction and the struct is
/// immutable afterwards, so sharing one grid across workers is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    n: usize,
    channels: usize,
    values: Vec<f64>,
}

impl VoxelGrid {
    /// All-zero grid.
    pub fn new(n: usize, channels: usize) -> Result<Self> {
        check_dims(n, 1, channels)?;
        Ok(Self {
            n,
            channels,
            values: vec![0.0; channels * n * n * n],
        })
    }

    /// Grid with every voxel set to `value`.
    pub fn filled(n: usize, channels: usize, value: f64) -> Result<Self> {
        check_dims(n, 1, channels)?;
        check_range(&[value])?;
        Ok(Self {
            n,
            channels,
            values: vec![value; channels * n * n * n],
        })
    }

    /// Wraps a dense value array, validating length and range.
    pub fn from_values(n: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(n, 1, channels)?;
        let expected = channels * n * n * n;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_range(&values)?;
        Ok(Self {
            n,
            channels,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.n + x) * self.n + y) * self.n + z
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(c, x, y, z)]
    }

    /// Construction-time mutation; rejects values outside `[0, 1]`.
    pub fn set(&mut self, c: usize, x: usize, y: usize, z: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange {
                index: self.index(c, x, y, z),
                value,
            });
        }
        let idx = self.index(c, x, y, z);
        self.values[idx] = value;
        Ok(())
    }

    /// The `n^3` slice of one channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        let len = self.n * self.n * self.n;
        &self.values[c * len..(c + 1) * len]
    }

    /// Returns the sole channel, or an error for multi-channel grids.
    pub fn single_channel(&self) -> Result<&[f64]> {
        if self.channels != 1 {
            return Err(Error::MultiChannel {
                channels: self.channels,
            });
        }
        Ok(&self.values)
    }

    /// Number of voxels with non-zero occupancy.
    pub fn occupied(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }
}

/// Single-channel H x W image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    h: usize,
    w: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        check_dims(h.min(w), 1, 1)?;
        Ok(Self {
            h,
            w,
            values: vec![0.0; h * w],
        })
    }

    pub fn from_values(h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(h.min(w), 1, 1)?;
        if values.len() != h * w {
            return Err(Error::LengthMismatch {
                expected: h * w,
                actual: values.len(),
            });
        }
        check_range(&values)?;
        Ok(Self { h, w, values })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.w + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange {
                index: row * self.w + col,
                value,
            });
        }
        self.values[row * self.w + col] = value;
        Ok(())
    }
}

/// C-channel image, layout `index(c, row, col) = (c*h + row)*w + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImage {
    h: usize,
    w: usize,
    channels: usize,
    values: Vec<f64>,
}

impl SemanticImage {
    pub fn new(h: usize, w: usize, channels: usize) -> Result<Self> {
        check_dims(h.min(w), 1, channels)?;
        Ok(Self {
            h,
            w,
            channels,
            values: vec![0.0; channels * h * w],
        })
    }

    pub fn from_values(h: usize, w: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(h.min(w), 1, channels)?;
        if values.len() != channels * h * w {
            return Err(Error::LengthMismatch {
                expected: channels * h * w,
                actual: values.len(),
            });
        }
        check_range(&values)?;
        Ok(Self {
            h,
            w,
            channels,
            values,
        })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, c: usize, row: usize, col: usize) -> usize {
        (c * self.h + row) * self.w + col
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.values[self.index(c, row, col)]
    }

    /// The H x W slice of one channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        let len = self.h * self.w;
        &self.values[c * len..(c + 1) * len]
    }
}

/// Gradient with the shape of a [`VoxelGrid`]; values are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGradient {
    pub n: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl GridGradient {
    pub fn zeros(n: usize, channels: usize) -> Self {
        Self {
            n,
            channels,
            values: vec![0.0; channels * n * n * n],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.n + x) * self.n + y) * self.n + z
    }

    pub fn matches(&self, grid: &VoxelGrid) -> bool {
        self.n == grid.n() && self.channels == grid.channels()
    }
}

/// Gradient with the shape of a rendered image (`channels == 1` for
/// silhouette and depth upstreams).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGradient {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ImageGradient {
    pub fn zeros(h: usize, w: usize, channels: usize) -> Self {
        Self {
            h,
            w,
            channels,
            values: vec![0.0; channels * h * w],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, row: usize, col: usize) -> usize {
        (c * self.h + row) * self.w + col
    }
}

/// Concatenates a one-hot viewpoint indicator to the image: channel 0 is
/// the image itself, channel `1 + j` is all-ones when `j == view_index`
/// and all-zero otherwise. An 8-view dataset therefore yields 9 channels.
pub fn annotate_viewpoint(img: &Image, view_index: usize, n_views: usize) -> Result<SemanticImage> {
    if view_index >= n_views {
        return Err(Error::ViewIndexOutOfRange {
            index: view_index,
            n_views,
        });
    }
    let (h, w) = (img.h(), img.w());
    let mut values = Vec::with_capacity((1 + n_views) * h * w);
    values.extend_from_slice(img.values());
    for j in 0..n_views {
        let fill = if j == view_index { 1.0 } else { 0.0 };
        values.extend(core::iter::repeat_n(fill, h * w));
    }
    SemanticImage::from_values(h, w, 1 + n_views, values)
}

fn check_dims(n: usize, min_n: usize, channels: usize) -> Result<()> {
    if n < min_n {
        return Err(Error::BadSideLength { min: min_n });
    }
    if channels == 0 {
        return Err(Error::NoChannels);
    }
    Ok(())
}

fn check_range(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange { index, value });
        }
    }
    Ok(())
}
