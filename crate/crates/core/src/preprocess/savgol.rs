//! Savitzky–Golay smoothing and differentiation.
//!
//! Coefficients come from a least-squares polynomial fit over the window,
//! solved once per `(window, polyorder, deriv_order)` and evaluation offset.
//! Interior points use the centred window; the first and last `window / 2`
//! points are evaluated off-centre on the first/last full window, so the
//! output always has the input's length.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SgParams {
    pub window: usize,
    pub polyorder: usize,
    pub deriv_order: usize,
}

impl SgParams {
    /// First derivative, window 11, quadratic.
    pub const SG1: SgParams = SgParams { window: 11, polyorder: 2, deriv_order: 1 };
    /// Second derivative, window 13, quadratic.
    pub const SG2: SgParams = SgParams { window: 13, polyorder: 2, deriv_order: 2 };

    pub fn new(window: usize, polyorder: usize, deriv_order: usize) -> Result<Self> {
        let p = Self { window, polyorder, deriv_order };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("window {} must be odd and >= 3", self.window)));
        }
        if self.polyorder >= self.window {
            return Err(Error::InvalidParams(format!(
                "polyorder {} must be < window {}",
                self.polyorder, self.window
            )));
        }
        if self.deriv_order > self.polyorder {
            return Err(Error::InvalidParams(format!(
                "deriv_order {} must be <= polyorder {}",
                self.deriv_order, self.polyorder
            )));
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.window / 2
    }
}

/// Convolution weights giving the `deriv_order`-th derivative of the fitted
/// polynomial at `offset` samples from the window centre, in units of
/// per-sample-spacing.
///
/// `offset` ranges over `-(window/2) ..= window/2`.
pub fn coefficients(p: &SgParams, offset: isize) -> Result<Vec<f64>> {
    p.validate()?;
    let m = p.half() as isize;
    if offset.abs() > m {
        return Err(Error::InvalidParams(format!("offset {offset} outside window")));
    }
    let cols = p.polyorder + 1;
    // Local abscissa u = z / m keeps the normal matrix well conditioned.
    let scale = m as f64;
    let vander = DMatrix::from_fn(p.window, cols, |row, k| {
        let u = (row as isize - m) as f64 / scale;
        u.powi(k as i32)
    });
    let normal = vander.transpose() * &vander;
    let u0 = offset as f64 / scale;
    let d = p.deriv_order;
    let rhs = DVector::from_fn(cols, |k, _| {
        if k < d {
            0.0
        } else {
            let falling: f64 = ((k - d + 1)..=k).map(|f| f as f64).product();
            falling * u0.powi((k - d) as i32) / scale.powi(d as i32)
        }
    });
    let c = normal.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    Ok((vander * c).iter().copied().collect())
}

/// Precomputed Savitzky–Golay filter for a fixed sample spacing.
#[derive(Debug, Clone)]
pub struct SgFilter {
    params: SgParams,
    /// Weights for evaluation offsets `-m ..= m`, index `offset + m`.
    weights: Vec<Vec<f64>>,
}

impl SgFilter {
    /// Build the filter; outputs are scaled by `1 / step^deriv_order` so
    /// derivatives carry physical units.
    pub fn new(params: SgParams, step: f64) -> Result<Self> {
        params.validate()?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParams(format!("sample spacing {step}")));
        }
        let m = params.half() as isize;
        let unit = step.powi(params.deriv_order as i32);
        let weights = (-m..=m)
            .map(|off| coefficients(&params, off).map(|w| w.into_iter().map(|c| c / unit).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self { params, weights })
    }

    pub fn params(&self) -> &SgParams {
        &self.params
    }

    pub fn center_weights(&self) -> &[f64] {
        &self.weights[self.params.half()]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.params.window;
        let m = self.params.half();
        let n = x.len();
        if n < w {
            return Err(Error::WindowTooLarge { window: w, len: n });
        }
        let dot = |weights: &[f64], start: usize| -> f64 {
            weights.iter().zip(&x[start..start + w]).map(|(a, b)| a * b).sum()
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..m {
            out.push(dot(&self.weights[i], 0));
        }
        let center = self.center_weights();
        for i in m..n - m {
            out.push(dot(center, i - m));
        }
        for i in n - m..n {
            let off = i - (n - w);
            out.push(dot(&self.weights[off], n - w));
        }
        Ok(out)
    }
}

/// One-shot filter application with spacing `step`.
pub fn savitzky_golay(x: &[f64], params: SgParams, step: f64) -> Result<Vec<f64>> {
    SgFilter::new(params, step)?.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_smoothing_weights() {
        // Classic 5-point quadratic smoother: (-3, 12, 17, 12, -3) / 35.
        let w = coefficients(&SgParams::new(5, 2, 0).unwrap(), 0).unwrap();
        let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn known_derivative_weights() {
        // 5-point quadratic first derivative: (-2, -1, 0, 1, 2) / 10.
        let w = coefficients(&SgParams::new(5, 2, 1).unwrap(), 0).unwrap();
        let expected = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|v| v / 10.0);
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn invalid_params() {
        assert!(SgParams::new(4, 2, 1).is_err());
        assert!(SgParams::new(1, 0, 0).is_err());
        assert!(SgParams::new(5, 5, 1).is_err());
        assert!(SgParams::new(5, 2, 3).is_err());
        assert!(matches!(
            savitzky_golay(&[1.0; 5], SgParams::SG1, 0.5),
            Err(Error::WindowTooLarge { window: 11, len: 5 })
        ));
    }

    #[test]
    fn constant_signal() {
        let x = vec![4.25; 200];
        let d1 = savitzky_golay(&x, SgParams::SG1, 0.5).unwrap();
        assert!(d1.iter().all(|v| v.abs() < 1e-12));
        let s = savitzky_golay(&x, SgParams::new(7, 2, 0).unwrap(), 0.5).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 4.25).abs() < 1e-12);
    }

    #[test]
    fn edge_rows_reproduce_polynomials() {
        // Off-centre evaluation must still be exact on a quadratic.
        let step = 0.5;
        let x: Vec<f64> = (0..40).map(|i| {
            let t = i as f64 * step;
            0.3 * t * t - 2.0 * t + 1.0
        }).collect();
        let d1 = savitzky_golay(&x, SgParams::SG1, step).unwrap();
        for (i, v) in d1.iter().enumerate() {
            let t = i as f64 * step;
            assert!((v - (0.6 * t - 2.0)).abs() < 1e-9, "i={i}");
        }
    }
}
