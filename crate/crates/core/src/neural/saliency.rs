//! Gradient saliency of a trained network with respect to its spectral
//! input.

use nalgebra::DMatrix;

use super::spectrogram::columns_to_points;
use super::tensor::Tensor;
use super::{Architecture, Network, NeuralModel};
use crate::error::{Error, Result};
use crate::metrics::quantile;
use crate::spectral::WavelengthGrid;

/// Minimum distance between two reported peaks.
pub const PEAK_SEPARATION_NM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub wavelengths_nm: Vec<f64>,
    /// Non-negative magnitude per wavelength.
    pub magnitude: Vec<f64>,
    /// `(wavelength, magnitude)` sorted by descending magnitude.
    pub peaks: Vec<(f64, f64)>,
}

impl SaliencyMap {
    pub fn top_peaks(&self, k: usize) -> &[(f64, f64)] {
        &self.peaks[..k.min(self.peaks.len())]
    }
}

/// `∂ŷ_b / ∂x_b` for every sample of a batch, shaped like `x`.
pub fn input_gradient(net: &Network, x: &Tensor) -> Result<Tensor> {
    let (out, trace) = net.forward_trace(x)?;
    let ones = Tensor { shape: out.shape.clone(), data: vec![1.0; out.len()], requires_grad: false };
    let mut scratch = net.zero_grads();
    Ok(net.backward(trace, ones, &mut scratch, true).expect("input gradient requested"))
}

/// Local maxima above the 90th percentile, at least `separation_nm` apart,
/// strongest first. Plateaus report their first point.
pub fn find_peaks(magnitude: &[f64], wavelengths_nm: &[f64], separation_nm: f64) -> Vec<(f64, f64)> {
    let n = magnitude.len();
    if n == 0 {
        return Vec::new();
    }
    let step = if n > 1 { (wavelengths_nm[n - 1] - wavelengths_nm[0]) / (n - 1) as f64 } else { 1.0 };
    let radius = ((separation_nm / step).round() as usize).max(1);
    let threshold = quantile(magnitude, 0.9).unwrap_or(f64::INFINITY);
    let mut peaks: Vec<(f64, f64)> = (0..n)
        .filter(|&i| {
            let v = magnitude[i];
            v > 0.0
                && v >= threshold
                && magnitude[i.saturating_sub(radius)..i].iter().all(|&u| u < v)
                && magnitude[i + 1..(i + radius + 1).min(n)].iter().all(|&u| u <= v)
        })
        .map(|i| (wavelengths_nm[i], magnitude[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    peaks
}

/// Mean absolute input gradient over the rows of `x`, expressed per
/// wavelength of `grid`.
pub fn saliency(model: &NeuralModel, x: &DMatrix<f64>, grid: &WavelengthGrid) -> Result<SaliencyMap> {
    let n = model.n_points;
    if grid.n_points() != n {
        return Err(Error::WidthMismatch { expected: n, found: grid.n_points() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut total = vec![0.0; n];
    for r in 0..x.nrows() {
        let input = model.prepare(x, &[r])?;
        let g = input_gradient(&model.net, &input)?;
        match &model.arch {
            Architecture::Mlp(_) => {
                let k = model.y_std / model.x_scale;
                for (t, v) in total.iter_mut().zip(&g.data) {
                    *t += (v * k).abs();
                }
            }
            Architecture::Cnn(cfg) => {
                let (rows, cols) = (cfg.recipe.rows, cfg.recipe.cols);
                let mut per_col = vec![0.0; cols];
                for row in 0..rows {
                    for (c, acc) in per_col.iter_mut().enumerate() {
                        *acc += g.data[row * cols + c].abs();
                    }
                }
                for (t, v) in total.iter_mut().zip(columns_to_points(&per_col, n)) {
                    *t += v * model.y_std;
                }
            }
        }
    }
    let count = x.nrows() as f64;
    let magnitude: Vec<f64> = total.into_iter().map(|v| v / count).collect();
    let wavelengths_nm = grid.wavelengths();
    let peaks = find_peaks(&magnitude, &wavelengths_nm, PEAK_SEPARATION_NM);
    Ok(SaliencyMap { wavelengths_nm, magnitude, peaks })
}
