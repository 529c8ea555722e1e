//! Partial least squares regression for a single response (PLS1, NIPALS).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of latent variables used unless overridden.
pub const DEFAULT_COMPONENTS: usize = 29;

#[derive(Debug, Clone, PartialEq)]
pub struct PlsrModel {
    /// X weights, `d × k`.
    pub weights: DMatrix<f64>,
    /// X loadings, `d × k`.
    pub loadings: DMatrix<f64>,
    /// y loadings, length `k`.
    pub y_loadings: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
    /// Per-column standard deviation when X was autoscaled.
    pub x_scale: Option<DVector<f64>>,
    rotations: DMatrix<f64>,
    coefficients: DVector<f64>,
}

impl PlsrModel {
    /// Assemble a model from stored parameters, recomputing the derived
    /// projection.
    pub fn from_parts(
        weights: DMatrix<f64>,
        loadings: DMatrix<f64>,
        y_loadings: DVector<f64>,
        x_mean: DVector<f64>,
        y_mean: f64,
        x_scale: Option<DVector<f64>>,
    ) -> Result<Self> {
        let d = x_mean.len();
        let k = y_loadings.len();
        if weights.shape() != (d, k) || loadings.shape() != (d, k) {
            return Err(Error::ShapeMismatch {
                expected: vec![d, k],
                found: vec![weights.nrows(), weights.ncols()],
            });
        }
        if let Some(s) = &x_scale {
            if s.len() != d {
                return Err(Error::LengthMismatch { left: d, right: s.len() });
            }
        }
        let rotations = rotations(&weights, &loadings, k)?;
        let coefficients = &rotations * &y_loadings;
        Ok(Self { weights, loadings, y_loadings, x_mean, y_mean, x_scale, rotations, coefficients })
    }

    pub fn n_components(&self) -> usize {
        self.y_loadings.len()
    }

    pub fn n_features(&self) -> usize {
        self.x_mean.len()
    }

    /// Regression coefficients on the (scaled) centred inputs.
    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    /// Coefficients expressed on the raw input scale.
    pub fn raw_coefficients(&self) -> DVector<f64> {
        match &self.x_scale {
            Some(s) => self.coefficients.component_div(s),
            None => self.coefficients.clone(),
        }
    }

    fn check_width(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::WidthMismatch { expected: self.n_features(), found: x.ncols() });
        }
        Ok(())
    }

    fn center(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            let s = self.x_scale.as_ref().map_or(1.0, |s| s[j]);
            col.apply(|v| *v = (*v - self.x_mean[j]) / s);
        }
        xc
    }

    /// Latent-variable scores `T` (`n × k`).
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x)?;
        Ok(self.center(x) * &self.rotations)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(x)?;
        let mut y = self.center(x) * &self.coefficients;
        y.add_scalar_mut(self.y_mean);
        Ok(y)
    }

    /// RMSE on `(x, y)` using only the first `j` components, for
    /// `j = 1 ..= k`.
    pub fn validation_curve(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        if y.len() != x.nrows() {
            return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
        }
        let xc = self.center(x);
        (1..=self.n_components())
            .map(|j| {
                let r = rotations(&self.weights, &self.loadings, j)?;
                let beta = r * self.y_loadings.rows(0, j);
                let pred = &xc * beta;
                let mse = pred
                    .iter()
                    .zip(y)
                    .map(|(p, o)| (p + self.y_mean - o).powi(2))
                    .sum::<f64>()
                    / y.len() as f64;
                Ok(mse.sqrt())
            })
            .collect()
    }
}

/// `W (Pᵀ W)⁻¹` restricted to the first `k` components.
fn rotations(w: &DMatrix<f64>, p: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let wk = w.columns(0, k);
    if k == 0 {
        return Ok(DMatrix::zeros(w.nrows(), 0));
    }
    let ptw = p.columns(0, k).transpose() * wk;
    let inv = ptw.try_inverse().ok_or(Error::SingularSystem)?;
    Ok(wk * inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlsrOptions {
    pub n_components: usize,
    /// Autoscale X columns to unit variance before extraction.
    pub scale: bool,
}

impl Default for PlsrOptions {
    fn default() -> Self {
        Self { n_components: DEFAULT_COMPONENTS, scale: false }
    }
}

/// Fit with `k` components and no autoscaling.
pub fn plsr_fit(x: &DMatrix<f64>, y: &[f64], k: usize) -> Result<PlsrModel> {
    plsr_fit_with(x, y, PlsrOptions { n_components: k, scale: false })
}

/// NIPALS extraction of up to `opts.n_components` components.
///
/// If the residual covariance vanishes before `k` components are found the
/// model is returned with fewer components and a warning is logged.
pub fn plsr_fit_with(x: &DMatrix<f64>, y: &[f64], opts: PlsrOptions) -> Result<PlsrModel> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: n });
    }
    let k = opts.n_components;
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidParams(format!(
            "n_components {k} must be in 1..={} for {n} samples and {d} features",
            (n - 1).min(d)
        )));
    }

    let x_mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
    let x_scale = if opts.scale {
        Some(DVector::from_iterator(
            d,
            x.column_iter().zip(x_mean.iter()).map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                if sd > 0.0 { sd } else { 1.0 }
            }),
        ))
    } else {
        None
    };
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut e = x.clone();
    for (j, mut col) in e.column_iter_mut().enumerate() {
        let s = x_scale.as_ref().map_or(1.0, |s| s[j]);
        col.apply(|v| *v = (*v - x_mean[j]) / s);
    }
    let mut f = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let x_norm = e.norm();
    let y_norm = f.norm();
    let mut weights = Vec::with_capacity(k);
    let mut loadings = Vec::with_capacity(k);
    let mut y_loadings = Vec::with_capacity(k);

    for a in 0..k {
        let mut w = e.tr_mul(&f);
        let w_norm = w.norm();
        if w_norm <= 1e-12 * x_norm * y_norm || y_norm == 0.0 {
            log::warn!("PLSR: covariance exhausted after {a} of {k} components");
            break;
        }
        w /= w_norm;
        let t = &e * &w;
        let tt = t.norm_squared();
        if tt.sqrt() < 1e-12 * x_norm.max(1.0) {
            log::warn!("PLSR: degenerate score at component {}; keeping {a}", a + 1);
            break;
        }
        let p = e.tr_mul(&t) / tt;
        let c = f.dot(&t) / tt;
        e -= &t * p.transpose();
        f.axpy(-c, &t, 1.0);
        weights.push(w);
        loadings.push(p);
        y_loadings.push(c);
    }

    let kk = weights.len();
    let to_matrix = |cols: &[DVector<f64>]| {
        if cols.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    PlsrModel::from_parts(
        to_matrix(&weights),
        to_matrix(&loadings),
        DVector::from_vec(y_loadings),
        x_mean,
        y_mean,
        x_scale,
    )
    .inspect(|m| debug_assert_eq!(m.n_components(), kk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_exact() {
        let x1 = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 4.0, 7.0]);
        let y1 = [2.0, 4.0, 8.0, 14.0];
        let m1 = plsr_fit(&x1, &y1, 1).unwrap();
        let pred = m1.predict(&x1).unwrap();
        for (p, o) in pred.iter().zip(y1) {
            assert!((p - o).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_response() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, 0.0, 5.0, 2.0, 2.0]);
        let m = plsr_fit(&x, &[3.5; 4], 2).unwrap();
        assert_eq!(m.n_components(), 0);
        assert!(m.coefficients().iter().all(|c| *c == 0.0));
        let pred = m.predict(&x).unwrap();
        assert!(pred.iter().all(|p| *p == 3.5));
    }

    #[test]
    fn mean_row_has_zero_scores() {
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 2.0, 0.5, 3.0, 1.0, 1.5, 0.0, 5.0, 2.0, 2.0, 2.0, 1.0,
        ]);
        let y = [1.0, 2.0, 0.5, 3.0];
        let m = plsr_fit(&x, &y, 2).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 3, m.x_mean.as_slice());
        let t = m.transform(&mean_row).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-12));
        let dup = DMatrix::from_rows(&[x.row(1).into_owned(), x.row(1).into_owned()]);
        let td = m.transform(&dup).unwrap();
        assert_eq!(td.row(0), td.row(1));
    }

    #[test]
    fn bad_arguments() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        assert!(plsr_fit(&x, &[1.0, 2.0, 3.0], 3).is_err());
        assert!(plsr_fit(&x, &[1.0, 2.0], 1).is_err());
        let m = plsr_fit(&x, &[1.0, 2.0, 3.5], 2).unwrap();
        let wide = DMatrix::zeros(1, 3);
        assert!(matches!(m.predict(&wide), Err(Error::WidthMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn validation_curve_ends_at_full_model() {
        let x = DMatrix::from_fn(12, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * (i * j) as f64);
        let y: Vec<f64> = (0..12).map(|i| x[(i, 0)] - 0.5 * x[(i, 3)] + 0.2 * i as f64).collect();
        let m = plsr_fit(&x, &y, 3).unwrap();
        let curve = m.validation_curve(&x, &y).unwrap();
        assert_eq!(curve.len(), 3);
        let pred = m.predict(&x).unwrap();
        let full = (pred.iter().zip(&y).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / 12.0).sqrt();
        assert!((curve[2] - full).abs() < 1e-12);
        assert!(curve[2] <= curve[0] + 1e-12);
    }
}
