//! Reference implementations used as independent oracles by the
//! integration tests. Each one is written from the textbook definition and
//! shares no code with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

fn center(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j])
}

/// Ordinary least squares with intercept through the normal equations;
/// returns predictions at `xq`.
pub fn ols_predict(x: &DMatrix<f64>, y: &[f64], xq: &DMatrix<f64>) -> Vec<f64> {
    ridge_predict(x, y, 0.0, xq)
}

/// Ridge regression with an unpenalised intercept:
/// `w = (XcᵀXc + λI)⁻¹ Xcᵀ yc`, `b = ȳ − wᵀx̄`.
pub fn ridge_predict(x: &DMatrix<f64>, y: &[f64], lambda: f64, xq: &DMatrix<f64>) -> Vec<f64> {
    let mx = column_means(x);
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let xc = center(x, &mx);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - my));
    let mut a = xc.transpose() * &xc;
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let w = a.cholesky().expect("positive definite normal matrix").solve(&(xc.transpose() * yc));
    let b = my - w.dot(&mx);
    (0..xq.nrows()).map(|i| b + xq.row(i).transpose().dot(&w)).collect()
}

/// Per-feature min-max scaling with the range taken from `fit_on`.
pub fn minmax_scale(fit_on: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let c = fit_on.column(j);
        let (lo, hi) = (c.min(), c.max());
        ((x[(i, j)] - lo) / (hi - lo)).clamp(0.0, 1.0)
    })
}

/// `d`-th derivative at offset `at` (in samples from the window centre) of
/// the degree-`p` least-squares polynomial through `window`, in units of
/// `step`.
pub fn polyfit_derivative(window: &[f64], p: usize, d: usize, at: f64, step: f64) -> f64 {
    let w = window.len();
    let half = (w / 2) as f64;
    let v = DMatrix::from_fn(w, p + 1, |i, j| (i as f64 - half).powi(j as i32));
    let y = DVector::from_column_slice(window);
    let coef = v.clone().svd(true, true).solve(&y, 1e-14).expect("least-squares solve");
    // d/dx^d of sum c_j x^j at `at`.
    let mut acc = 0.0;
    for j in d..=p {
        let falling: f64 = (0..d).map(|k| (j - k) as f64).product();
        acc += coef[j] * falling * at.powi((j - d) as i32);
    }
    acc / step.powi(d as i32)
}

/// Naive "same"-padded 3×3 convolution of an `h × w × c_in` image with
/// kernels `k[ky][kx][ci][co]`.
pub fn conv3x3_same(img: &[f64], h: usize, w: usize, c_in: usize, k: &[f64], bias: &[f64]) -> Vec<f64> {
    let c_out = bias.len();
    let mut out = vec![0.0; h * w * c_out];
    for y in 0..h {
        for x in 0..w {
            for co in 0..c_out {
                let mut s = bias[co];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let (iy, ix) = (y as isize + ky as isize - 1, x as isize + kx as isize - 1);
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for ci in 0..c_in {
                            let v = img[(iy as usize * w + ix as usize) * c_in + ci];
                            s += v * k[((ky * 3 + kx) * c_in + ci) * c_out + co];
                        }
                    }
                }
                out[(y * w + x) * c_out + co] = s;
            }
        }
    }
    out
}
