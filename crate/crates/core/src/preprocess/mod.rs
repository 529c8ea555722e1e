//! Spectral pretreatment: absorbance, min-max normalisation and
//! Savitzky–Golay filtering, composed into a replayable pipeline.

mod savgol;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{to_absorbance, SpectralDataset, Spectrum, SpectrumKind};

pub use savgol::{coefficients as sg_coefficients, savitzky_golay, SgFilter, SgParams};

/// Rescale one spectrum to `[0, 1]` by its own minimum and maximum.
pub fn minmax_normalize(s: &Spectrum) -> Result<Spectrum> {
    Ok(Spectrum {
        values: minmax_values(&s.values)?,
        kind: s.kind,
        sample_id: s.sample_id.clone(),
    })
}

pub(crate) fn minmax_values(x: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(hi > lo) {
        return Err(Error::ConstantSpectrum);
    }
    let range = hi - lo;
    Ok(x.iter().map(|v| (v - lo) / range).collect())
}

/// Apply a Savitzky–Golay filter to a spectrum sampled every `step_nm`.
pub fn savitzky_golay_spectrum(s: &Spectrum, p: SgParams, step_nm: f64) -> Result<Spectrum> {
    let values = savitzky_golay(&s.values, p, step_nm)?;
    Ok(Spectrum { values, kind: SpectrumKind::Derivative(p.deriv_order as u8), sample_id: s.sample_id.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Absorbance,
    MinMaxNormalize,
    SavitzkyGolay(SgParams),
}

impl Step {
    fn rank(&self) -> u8 {
        match self {
            Step::Absorbance => 0,
            Step::MinMaxNormalize => 1,
            Step::SavitzkyGolay(_) => 2,
        }
    }

    fn output_kind(&self, input: SpectrumKind) -> SpectrumKind {
        match self {
            Step::Absorbance => SpectrumKind::Absorbance,
            Step::MinMaxNormalize => input,
            Step::SavitzkyGolay(p) => SpectrumKind::Derivative(p.deriv_order as u8),
        }
    }
}

/// Ordered pretreatment steps.
///
/// Steps run in the fixed order absorbance → min-max → Savitzky–Golay,
/// each at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessPipeline {
    steps: Vec<Step>,
}

impl PreprocessPipeline {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        for pair in steps.windows(2) {
            if pair[1].rank() <= pair[0].rank() {
                return Err(Error::InvalidParams(format!(
                    "pipeline step {:?} cannot follow {:?}",
                    pair[1], pair[0]
                )));
            }
        }
        for s in &steps {
            if let Step::SavitzkyGolay(p) = s {
                p.validate()?;
            }
        }
        Ok(Self { steps })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Min-max normalisation followed by the given Savitzky–Golay filter,
    /// optionally preceded by the absorbance transform for reflectance input.
    pub fn standard(sg: Option<SgParams>, from_reflectance: bool) -> Self {
        let mut steps = Vec::new();
        if from_reflectance {
            steps.push(Step::Absorbance);
        }
        steps.push(Step::MinMaxNormalize);
        if let Some(p) = sg {
            steps.push(Step::SavitzkyGolay(p));
        }
        Self { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Kind produced when the pipeline is applied to data of kind `input`.
    pub fn output_kind(&self, input: SpectrumKind) -> Result<SpectrumKind> {
        let mut kind = input;
        for step in &self.steps {
            if *step == Step::Absorbance && kind != SpectrumKind::ReflectancePct {
                return Err(Error::WrongKind {
                    expected: SpectrumKind::ReflectancePct.to_string(),
                    found: kind.to_string(),
                });
            }
            kind = step.output_kind(kind);
        }
        Ok(kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pipeline serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PreprocessPipeline = serde_json::from_str(s)
            .map_err(|e| Error::Container(format!("bad pipeline blob: {e}")))?;
        Self::new(raw.steps)
    }

    /// Run the pipeline on one spectrum sampled every `step_nm`.
    pub fn apply_spectrum(&self, s: &Spectrum, step_nm: f64) -> Result<Spectrum> {
        let filters = self.filters(step_nm)?;
        self.apply_with(&filters, s)
    }

    fn filters(&self, step_nm: f64) -> Result<Vec<Option<SgFilter>>> {
        self.steps
            .iter()
            .map(|s| match s {
                Step::SavitzkyGolay(p) => SgFilter::new(*p, step_nm).map(Some),
                _ => Ok(None),
            })
            .collect()
    }

    fn apply_with(&self, filters: &[Option<SgFilter>], s: &Spectrum) -> Result<Spectrum> {
        let mut cur = s.clone();
        for (step, filter) in self.steps.iter().zip(filters) {
            cur = match step {
                Step::Absorbance => to_absorbance(&cur)?,
                Step::MinMaxNormalize => minmax_normalize(&cur)?,
                Step::SavitzkyGolay(p) => {
                    let f = filter.as_ref().expect("filter built for every SG step");
                    Spectrum {
                        values: f.apply(&cur.values)?,
                        kind: SpectrumKind::Derivative(p.deriv_order as u8),
                        sample_id: cur.sample_id,
                    }
                }
            };
        }
        Ok(cur)
    }
}

/// Apply `p` to every spectrum of `d`. Errors carry the failing sample id.
pub fn apply_pipeline(d: &SpectralDataset, p: &PreprocessPipeline) -> Result<SpectralDataset> {
    p.output_kind(d.kind())?;
    if p.is_empty() {
        return Ok(d.clone());
    }
    let filters = p.filters(d.grid().step_nm)?;
    let spectra = d
        .spectra()
        .par_iter()
        .map(|s| p.apply_with(&filters, s).map_err(|e| e.in_sample(&s.sample_id)))
        .collect::<Result<Vec<_>>>()?;
    d.map_spectra(spectra)
}
