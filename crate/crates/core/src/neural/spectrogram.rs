//! Line-plot rasterization of a spectrum into a binary image.
//!
//! The spectrum is resampled to `cols` columns by linear interpolation,
//! min-max scaled so that the maximum lands on row 0 and the minimum on row
//! `rows - 1`, and drawn as a connected one-pixel polyline: every column
//! holds its own pixel plus a vertical run joining it to the previous
//! column's row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECIPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrogramRecipe {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
}

impl Default for SpectrogramRecipe {
    fn default() -> Self {
        Self { version: RECIPE_VERSION, rows: 244, cols: 488 }
    }
}

impl SpectrogramRecipe {
    pub fn render(&self, values: &[f64]) -> Result<Vec<f64>> {
        if self.version != RECIPE_VERSION {
            return Err(Error::InvalidParams(format!("unknown spectrogram recipe version {}", self.version)));
        }
        render_spectrogram(values, self.rows, self.cols)
    }
}

/// Linear interpolation of `values` onto `cols` equally spaced positions
/// spanning the same range.
pub fn resample_linear(values: &[f64], cols: usize) -> Vec<f64> {
    let n = values.len();
    if n == 1 || cols == 1 {
        return vec![values[0]; cols];
    }
    (0..cols)
        .map(|c| {
            let u = c as f64 * (n - 1) as f64 / (cols - 1) as f64;
            lerp_at(values, u)
        })
        .collect()
}

/// Map per-column values back onto `n` points (the inverse of the
/// resampling positions).
pub fn columns_to_points(columns: &[f64], n: usize) -> Vec<f64> {
    let cols = columns.len();
    if n == 1 || cols == 1 {
        return vec![columns[0]; n];
    }
    (0..n)
        .map(|i| {
            let u = i as f64 * (cols - 1) as f64 / (n - 1) as f64;
            lerp_at(columns, u)
        })
        .collect()
}

fn lerp_at(values: &[f64], u: f64) -> f64 {
    let i0 = (u.floor() as usize).min(values.len() - 1);
    let frac = u - i0 as f64;
    if frac == 0.0 || i0 + 1 == values.len() {
        values[i0]
    } else {
        values[i0] + frac * (values[i0 + 1] - values[i0])
    }
}

/// Rasterize `values` into a row-major `rows × cols` image of zeros and
/// ones.
pub fn render_spectrogram(values: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidParams(format!("spectrogram must be at least 2×2, got {rows}×{cols}")));
    }
    let resampled = resample_linear(values, cols);
    let (lo, hi) = resampled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::ConstantSpectrum);
    }
    let row_of = |v: f64| (((hi - v) / (hi - lo)) * (rows - 1) as f64).round() as usize;
    let mut img = vec![0.0; rows * cols];
    let mut prev: Option<usize> = None;
    for (c, &v) in resampled.iter().enumerate() {
        let r = row_of(v);
        let (a, b) = match prev {
            Some(p) => (p.min(r), p.max(r)),
            None => (r, r),
        };
        for row in a..=b {
            img[row * cols + c] = 1.0;
        }
        prev = Some(r);
    }
    Ok(img)
}
