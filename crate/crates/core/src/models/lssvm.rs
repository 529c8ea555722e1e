//! Least-squares support vector regression with a linear kernel.
//!
//! Solves the dual system
//!
//! ```text
//! [ 0   1ᵀ        ] [ b ]   [ 0 ]
//! [ 1   K + I / γ ] [ α ] = [ y ]
//! ```
//!
//! with `K = Z Zᵀ` over min-max scaled features `Z`. Large training sets are
//! solved through the equivalent `(k + 1)`-dimensional primal system and the
//! dual variables are recovered from `α_i = γ · e_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Above this many samples the primal route is used.
const DUAL_LIMIT: usize = 2000;

pub const DEFAULT_GAMMA: f64 = 10.0;

/// Per-feature min-max scaler fitted on training data; inputs outside the
/// training range are clamped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (min, max) = x
            .column_iter()
            .map(|c| (c.min(), c.max()))
            .unzip();
        Self { min, max }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            let range = hi - lo;
            col.apply(|v| {
                *v = if range > 0.0 { ((*v - lo) / range).clamp(0.0, 1.0) } else { 0.0 };
            });
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LssvmModel {
    pub alphas: DVector<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Scaled training inputs, `n × k`.
    pub support: DMatrix<f64>,
    pub scaler: MinMaxScaler,
    /// Primal weights `Σ α_i z_i`, cached for prediction.
    weights: DVector<f64>,
}

impl LssvmModel {
    pub fn from_parts(
        alphas: DVector<f64>,
        bias: f64,
        gamma: f64,
        support: DMatrix<f64>,
        scaler: MinMaxScaler,
    ) -> Result<Self> {
        if support.nrows() != alphas.len() {
            return Err(Error::LengthMismatch { left: support.nrows(), right: alphas.len() });
        }
        if scaler.min.len() != support.ncols() || scaler.max.len() != support.ncols() {
            return Err(Error::LengthMismatch { left: support.ncols(), right: scaler.min.len() });
        }
        let weights = support.tr_mul(&alphas);
        Ok(Self { alphas, bias, gamma, support, scaler, weights })
    }

    pub fn n_features(&self) -> usize {
        self.support.ncols()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::WidthMismatch { expected: self.n_features(), found: x.ncols() });
        }
        let mut out = self.scaler.transform(x) * &self.weights;
        out.add_scalar_mut(self.bias);
        Ok(out)
    }

    /// `‖A·z − rhs‖ / ‖rhs‖` of the dual system for training targets `y`.
    pub fn dual_residual(&self, y: &[f64]) -> f64 {
        let n = self.alphas.len();
        let k = &self.support * self.support.transpose();
        let mut r = DVector::zeros(n + 1);
        r[0] = self.alphas.sum();
        for i in 0..n {
            let ka: f64 = k.row(i).iter().zip(self.alphas.iter()).map(|(a, b)| a * b).sum();
            r[i + 1] = self.bias + ka + self.alphas[i] / self.gamma - y[i];
        }
        let rhs = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.norm() / rhs.max(f64::MIN_POSITIVE)
    }
}

fn solve_or_pinv(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(sol) = a.clone().lu().solve(b) {
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(sol);
        }
    }
    log::warn!("LS-SVM system is singular; falling back to the pseudo-inverse");
    a.svd(true, true).solve(b, 1e-12).map_err(|_| Error::SingularSystem)
}

pub fn lssvm_fit(t: &DMatrix<f64>, y: &[f64], gamma: f64) -> Result<LssvmModel> {
    let n = t.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma {gamma} must be positive")));
    }
    let scaler = MinMaxScaler::fit(t);
    let z = scaler.transform(t);
    let (bias, alphas) = if n <= DUAL_LIMIT { solve_dual(&z, y, gamma)? } else { solve_primal(&z, y, gamma)? };
    LssvmModel::from_parts(alphas, bias, gamma, z, scaler)
}

fn solve_dual(z: &DMatrix<f64>, y: &[f64], gamma: f64) -> Result<(f64, DVector<f64>)> {
    let n = z.nrows();
    let k = z * z.transpose();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        a[(0, i + 1)] = 1.0;
        a[(i + 1, 0)] = 1.0;
        for j in 0..n {
            a[(i + 1, j + 1)] = k[(i, j)];
        }
        a[(i + 1, i + 1)] += 1.0 / gamma;
    }
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        rhs[i + 1] = y[i];
    }
    let sol = solve_or_pinv(a, &rhs)?;
    Ok((sol[0], sol.rows(1, n).into_owned()))
}

fn solve_primal(z: &DMatrix<f64>, y: &[f64], gamma: f64) -> Result<(f64, DVector<f64>)> {
    let (n, k) = z.shape();
    // Unknowns [w; b]: (ZᵀZ + I/γ) w + Zᵀ1 b = Zᵀy, 1ᵀZ w + n b = Σy.
    let mut a = DMatrix::zeros(k + 1, k + 1);
    a.view_mut((0, 0), (k, k)).copy_from(&z.tr_mul(z));
    for j in 0..k {
        a[(j, j)] += 1.0 / gamma;
        let colsum = z.column(j).sum();
        a[(j, k)] = colsum;
        a[(k, j)] = colsum;
    }
    a[(k, k)] = n as f64;
    let yv = DVector::from_column_slice(y);
    let mut rhs = DVector::zeros(k + 1);
    rhs.rows_mut(0, k).copy_from(&z.tr_mul(&yv));
    rhs[k] = yv.sum();
    let sol = solve_or_pinv(a, &rhs)?;
    let w = sol.rows(0, k).into_owned();
    let b = sol[k];
    let e = yv - z * &w;
    let alphas = e.map(|v| (v - b) * gamma);
    Ok((b, alphas))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let t = DMatrix::from_fn(6, 2, |i, j| (i * 3 + j) as f64);
        let m = lssvm_fit(&t, &[4.0; 6], 10.0).unwrap();
        assert!(m.alphas.iter().all(|a| a.abs() < 1e-10));
        assert!((m.bias - 4.0).abs() < 1e-10);
    }

    #[test]
    fn two_point_line() {
        let t = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let m = lssvm_fit(&t, &[2.0, 6.0], 1e6).unwrap();
        let pred = m.predict(&DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0])).unwrap();
        for (p, e) in pred.iter().zip([2.0, 4.0, 6.0]) {
            assert!((p - e).abs() < 1e-4, "{p} vs {e}");
        }
    }

    #[test]
    fn primal_and_dual_agree() {
        let t = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 11) % 13) as f64 * 0.3 + j as f64);
        let y: Vec<f64> = (0..30).map(|i| t[(i, 0)] * 1.5 - t[(i, 2)] + ((i % 4) as f64) * 0.1).collect();
        let z = MinMaxScaler::fit(&t).transform(&t);
        let (b1, a1) = solve_dual(&z, &y, 5.0).unwrap();
        let (b2, a2) = solve_primal(&z, &y, 5.0).unwrap();
        assert!((b1 - b2).abs() < 1e-9);
        assert!((&a1 - &a2).norm() < 1e-8 * a1.norm().max(1.0));
    }

    #[test]
    fn scaler_clamps() {
        let t = DMatrix::from_row_slice(2, 1, &[0.0, 10.0]);
        let s = MinMaxScaler::fit(&t);
        let z = s.transform(&DMatrix::from_row_slice(3, 1, &[-5.0, 5.0, 20.0]));
        assert_eq!(z.as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_gamma() {
        let t = DMatrix::zeros(2, 1);
        assert!(lssvm_fit(&t, &[1.0, 2.0], 0.0).is_err());
        assert!(lssvm_fit(&t, &[1.0], 1.0).is_err());
    }
}
