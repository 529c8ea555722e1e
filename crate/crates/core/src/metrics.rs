//! Distribution comparison, regression accuracy metrics and quality bands.
//!
//! RPD and RPIQ are plain ratios of spread to RMSE. Quartiles use linear
//! interpolation between order statistics at position `(n − 1)·q`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical p-Wasserstein distance between two one-dimensional samples.
///
/// Both quantile functions are sampled at the midpoints of `max(n, m)`
/// equal-probability bins; for equal sizes this pairs order statistics.
pub fn wasserstein(x: &[f64], y: &[f64], p: u32) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if p == 0 {
        return Err(Error::InvalidParams("wasserstein order p must be >= 1".into()));
    }
    let xs = sorted(x);
    let ys = sorted(y);
    let bins = xs.len().max(ys.len());
    let quantile = |s: &[f64], i: usize| -> f64 {
        // Left-continuous inverse CDF at q = (i + 0.5) / bins.
        let q = (i as f64 + 0.5) / bins as f64;
        let k = (q * s.len() as f64).ceil() as usize;
        s[k.clamp(1, s.len()) - 1]
    };
    let pf = p as f64;
    let sum: f64 = (0..bins)
        .map(|i| (quantile(&xs, i) - quantile(&ys, i)).abs().powf(pf))
        .sum();
    Ok((sum / bins as f64).powf(1.0 / pf))
}

fn check_pairs(obs: &[f64], pred: &[f64]) -> Result<()> {
    if obs.len() != pred.len() {
        return Err(Error::LengthMismatch { left: obs.len(), right: pred.len() });
    }
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn r_squared(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(obs, pred)?;
    if obs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: obs.len() });
    }
    let m = mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(obs, pred)?;
    let mse = obs.iter().zip(pred).map(|(o, p)| (p - o).powi(2)).sum::<f64>() / obs.len() as f64;
    Ok(mse.sqrt())
}

/// Divisor used for the standard deviation of observed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StdevKind {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n − 1`.
    Sample,
}

pub fn stdev(x: &[f64], kind: StdevKind) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: x.len() });
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let denom = match kind {
        StdevKind::Population => x.len() as f64,
        StdevKind::Sample => (x.len() - 1) as f64,
    };
    Ok((ss / denom).sqrt())
}

/// RPD from an already computed spread: `obs_std / rmse`.
pub fn rpd_from_std(obs_std: f64, rmse_val: f64) -> Result<f64> {
    if rmse_val == 0.0 {
        return Err(Error::ZeroRmse);
    }
    if !(rmse_val > 0.0) {
        return Err(Error::InvalidParams(format!("rmse {rmse_val}")));
    }
    Ok(obs_std / rmse_val)
}

/// Ratio of performance to deviation with a population standard deviation.
pub fn rpd(obs: &[f64], rmse_val: f64) -> Result<f64> {
    rpd_with(obs, rmse_val, StdevKind::Population)
}

pub fn rpd_with(obs: &[f64], rmse_val: f64, kind: StdevKind) -> Result<f64> {
    rpd_from_std(stdev(obs, kind)?, rmse_val)
}

/// RPIQ from an already computed interquartile range: `iq / rmse`.
pub fn rpiq_from_iq(iq: f64, rmse_val: f64) -> Result<f64> {
    rpd_from_std(iq, rmse_val)
}

pub fn rpiq(obs: &[f64], rmse_val: f64) -> Result<f64> {
    if obs.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, have: obs.len() });
    }
    rpiq_from_iq(quartiles(obs)?.iq, rmse_val)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iq: f64,
}

/// Quantile `q ∈ [0, 1]` by linear interpolation at rank `(n − 1)·q`.
pub fn quantile(x: &[f64], q: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(quantile_sorted(&sorted(x), q))
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = (s.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let frac = pos - lo as f64;
    s[lo] + frac * (s[hi] - s[lo])
}

pub fn quartiles(x: &[f64]) -> Result<QuartileSummary> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = sorted(x);
    let q1 = quantile_sorted(&s, 0.25);
    let q2 = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    Ok(QuartileSummary { q1, q2, q3, iq: q3 - q1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityBand {
    Poor,
    Moderate,
    Good,
    Excellent,
}

impl fmt::Display for QualityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityBand::Poor => "Poor",
            QualityBand::Moderate => "Moderate",
            QualityBand::Good => "Good",
            QualityBand::Excellent => "Excellent",
        })
    }
}

fn r2_band(r2: f64) -> QualityBand {
    if r2 > 0.90 {
        QualityBand::Excellent
    } else if r2 > 0.82 {
        QualityBand::Good
    } else if r2 > 0.66 {
        QualityBand::Moderate
    } else {
        QualityBand::Poor
    }
}

fn rpd_band(rpd: f64) -> QualityBand {
    if rpd > 3.0 {
        QualityBand::Excellent
    } else if rpd > 2.5 {
        QualityBand::Good
    } else if rpd > 2.0 {
        QualityBand::Moderate
    } else {
        QualityBand::Poor
    }
}

/// Joint R²/RPD band; when the two criteria disagree the weaker band wins.
pub fn quality_band(r2: f64, rpd: f64) -> QualityBand {
    r2_band(r2).min(rpd_band(rpd))
}

/// Total carbonate content from the crystalline-phase weight fraction and
/// the crystalline index of the sample.
pub fn xrd_total_carbonates(crystalline_wt_pct: f64, crystalline_index: f64) -> Result<f64> {
    if !(crystalline_index > 0.0 && crystalline_index <= 1.0) {
        return Err(Error::InvalidCrystallineIndex(crystalline_index));
    }
    if !(crystalline_wt_pct >= 0.0) {
        return Err(Error::NegativeContent(crystalline_wt_pct));
    }
    Ok(crystalline_wt_pct / crystalline_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub r2: f64,
    pub rmse: f64,
    /// `+∞` when the prediction is perfect.
    pub rpd: f64,
    /// `+∞` when the prediction is perfect.
    pub rpiq: f64,
    pub quartiles: QuartileSummary,
    pub obs_std: f64,
    pub band: QualityBand,
    pub residuals: Vec<f64>,
}

/// Compute every accuracy metric for paired observations and predictions.
pub fn evaluate(obs: &[f64], pred: &[f64], stdev_kind: StdevKind) -> Result<EvaluationReport> {
    check_pairs(obs, pred)?;
    if obs.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, have: obs.len() });
    }
    let r2 = r_squared(obs, pred)?;
    let rmse_val = rmse(obs, pred)?;
    let obs_std = stdev(obs, stdev_kind)?;
    let quartiles = quartiles(obs)?;
    let (rpd, rpiq) = if rmse_val == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (rpd_from_std(obs_std, rmse_val)?, rpiq_from_iq(quartiles.iq, rmse_val)?)
    };
    Ok(EvaluationReport {
        n: obs.len(),
        r2,
        rmse: rmse_val,
        rpd,
        rpiq,
        quartiles,
        obs_std,
        band: quality_band(r2, rpd),
        residuals: pred.iter().zip(obs).map(|(p, o)| p - o).collect(),
    })
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.10}")
    }
}

impl EvaluationReport {
    /// Flat `key=value` lines, one metric per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("r2", self.r2),
            ("rmse", self.rmse),
            ("rpd", self.rpd),
            ("rpiq", self.rpiq),
            ("obs_std", self.obs_std),
            ("q1", self.quartiles.q1),
            ("q2", self.quartiles.q2),
            ("q3", self.quartiles.q3),
            ("iq", self.quartiles.iq),
        ] {
            out.push_str(&format!("{k}={}\n", fmt_metric(v)));
        }
        out.push_str(&format!("n={}\nband={}\n", self.n, self.band));
        out
    }

    /// JSON object; infinite ratios are written as the string `"inf"`.
    pub fn to_json(&self) -> String {
        let num = |v: f64| {
            if v.is_finite() {
                serde_json::json!(v)
            } else {
                serde_json::json!(fmt_metric(v))
            }
        };
        serde_json::to_string_pretty(&serde_json::json!({
            "n": self.n,
            "r2": num(self.r2),
            "rmse": num(self.rmse),
            "rpd": num(self.rpd),
            "rpiq": num(self.rpiq),
            "obs_std": num(self.obs_std),
            "quartiles": self.quartiles,
            "band": self.band.to_string(),
            "residuals": self.residuals,
        }))
        .expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wasserstein_examples() {
        let x = [3.0, 1.0, 2.0, 5.0];
        assert_eq!(wasserstein(&x, &[5.0, 2.0, 3.0, 1.0], 2).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.5).collect();
        assert!((wasserstein(&x, &shifted, 1).unwrap() - 1.5).abs() < 1e-12);
        let d = wasserstein(&[0.0, 0.0], &[0.0, 2.0], 2).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(wasserstein(&[], &[1.0], 1), Err(Error::EmptyInput)));
    }

    #[test]
    fn wasserstein_unequal_sizes() {
        // x = {0, 1}, y = {0, 0, 1, 1} → identical distributions.
        assert_eq!(wasserstein(&[0.0, 1.0], &[0.0, 0.0, 1.0, 1.0], 1).unwrap(), 0.0);
        // Point mass vs two points: |0 − 0| and |0 − 2| averaged.
        assert!((wasserstein(&[0.0], &[0.0, 2.0], 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_examples() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&obs, &obs).unwrap(), 1.0);
        assert_eq!(r_squared(&obs, &[2.5; 4]).unwrap(), 0.0);
        assert!(matches!(r_squared(&[1.0; 3], &[1.0; 3]), Err(Error::ZeroVariance)));
        assert_eq!(rmse(&obs, &obs).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(rpd(&obs, 0.0), Err(Error::ZeroRmse)));
        assert_eq!(rpd_from_std(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(rpiq_from_iq(4.47, 4.47).unwrap(), 1.0);
        assert!((rpiq_from_iq(9.42, 4.47).unwrap() - 2.107).abs() < 1e-3);
    }

    #[test]
    fn quartile_rule() {
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.q2, q.q3), (1.75, 2.5, 3.25));
        assert_eq!(q.iq, 1.5);
    }

    #[test]
    fn band_examples() {
        assert_eq!(quality_band(0.95, 3.5), QualityBand::Excellent);
        assert_eq!(quality_band(0.50, 1.0), QualityBand::Poor);
        assert_eq!(quality_band(0.84, 2.14), QualityBand::Moderate);
        assert_eq!(quality_band(0.90, 3.0), QualityBand::Good);
    }

    #[test]
    fn xrd_examples() {
        assert!((xrd_total_carbonates(6.07, 0.72).unwrap() - 8.43).abs() < 0.01);
        assert_eq!(xrd_total_carbonates(3.5, 1.0).unwrap(), 3.5);
        assert_eq!(xrd_total_carbonates(0.0, 0.5).unwrap(), 0.0);
        assert!(xrd_total_carbonates(1.0, 0.0).is_err());
        assert!(xrd_total_carbonates(1.0, 1.2).is_err());
    }

    #[test]
    fn perfect_prediction_report() {
        let obs = [1.0, 5.0, 2.0, 8.0, 3.0];
        let r = evaluate(&obs, &obs, StdevKind::Population).unwrap();
        assert_eq!(r.r2, 1.0);
        assert!(r.rpd.is_infinite());
        assert_eq!(r.band, QualityBand::Excellent);
        assert!(r.to_key_value().contains("rpd=inf\n"));
        assert!(r.to_json().contains("\"inf\""));
    }

    proptest! {
        #[test]
        fn rpd_times_rmse_is_stdev(
            obs in prop::collection::vec(0.0f64..50.0, 2..40),
            rmse_val in 0.01f64..20.0,
        ) {
            let sd = stdev(&obs, StdevKind::Population).unwrap();
            let r = rpd(&obs, rmse_val).unwrap();
            prop_assert!((r * rmse_val - sd).abs() <= 1e-12 * sd.max(1.0));
        }

        #[test]
        fn r2_at_most_one(pairs in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 3..30)) {
            let (obs, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(stdev(&obs, StdevKind::Population).unwrap() > 1e-6);
            prop_assert!(r_squared(&obs, &pred).unwrap() <= 1.0);
        }

        #[test]
        fn rmse_translation_invariant(
            pairs in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 1..30),
            c in -100.0f64..100.0,
        ) {
            let (obs, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = rmse(&obs, &pred).unwrap();
            let o2: Vec<f64> = obs.iter().map(|v| v + c).collect();
            let p2: Vec<f64> = pred.iter().map(|v| v + c).collect();
            prop_assert!((rmse(&o2, &p2).unwrap() - a).abs() < 1e-9);
        }

        #[test]
        fn wasserstein_symmetric(
            x in prop::collection::vec(-10.0f64..10.0, 1..30),
            y in prop::collection::vec(-10.0f64..10.0, 1..30),
            p in 1u32..4,
        ) {
            let a = wasserstein(&x, &y, p).unwrap();
            let b = wasserstein(&y, &x, p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            if x.len() == y.len() {
                prop_assert_eq!(a == 0.0, sorted(&x) == sorted(&y));
            }
        }
    }
}
