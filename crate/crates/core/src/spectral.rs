//! Wavelength grid, spectrum and dataset types, and the reflectance-level
//! operations applied before any pretreatment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform wavelength grid in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub end_nm: f64,
    pub step_nm: f64,
}

impl WavelengthGrid {
    /// The 1150–2500 nm grid at 0.5 nm used throughout the toolkit.
    pub const NIR: WavelengthGrid = WavelengthGrid { start_nm: 1150.0, end_nm: 2500.0, step_nm: 0.5 };

    pub fn new(start_nm: f64, end_nm: f64, step_nm: f64) -> Result<Self> {
        if !(start_nm.is_finite() && end_nm.is_finite() && step_nm.is_finite())
            || step_nm <= 0.0
            || end_nm <= start_nm
        {
            return Err(Error::InvalidParams(format!(
                "grid {start_nm}..{end_nm} step {step_nm}"
            )));
        }
        let span = (end_nm - start_nm) / step_nm;
        if (span - span.round()).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "grid span {start_nm}..{end_nm} is not a multiple of {step_nm}"
            )));
        }
        Ok(Self { start_nm, end_nm, step_nm })
    }

    pub fn n_points(&self) -> usize {
        ((self.end_nm - self.start_nm) / self.step_nm).round() as usize + 1
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        self.start_nm + index as f64 * self.step_nm
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.wavelength(i)).collect()
    }

    /// Index of the grid point nearest to `nm`, clamped to the grid.
    pub fn nearest_index(&self, nm: f64) -> usize {
        let pos = ((nm - self.start_nm) / self.step_nm).round();
        pos.clamp(0.0, (self.n_points() - 1) as f64) as usize
    }
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self::NIR
    }
}

/// What the values of a spectrum represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// Diffuse reflectance in percent, valid range (0, 100].
    ReflectancePct,
    Absorbance,
    /// Savitzky–Golay output of the given derivative order (0 = smoothed).
    Derivative(u8),
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumKind::ReflectancePct => f.write_str("reflectance-percent"),
            SpectrumKind::Absorbance => f.write_str("absorbance"),
            SpectrumKind::Derivative(d) => write!(f, "derivative-{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub sample_id: String,
}

impl Spectrum {
    pub fn new(sample_id: impl Into<String>, kind: SpectrumKind, values: Vec<f64>) -> Self {
        Self { values, kind, sample_id: sample_id.into() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn with_values(&self, kind: SpectrumKind, values: Vec<f64>) -> Spectrum {
        Spectrum { values, kind, sample_id: self.sample_id.clone() }
    }
}

/// Library a sample (or a whole dataset) came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Kssl,
    Lucas,
    Local,
    Merged,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Kssl => "KSSL",
            Source::Lucas => "LUCAS",
            Source::Local => "Local",
            Source::Merged => "Merged",
        })
    }
}

/// Spectra on one grid with their carbonate labels (g/100g).
///
/// Labels may be `NaN` only in datasets loaded for prediction, where the
/// reference value is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    grid: WavelengthGrid,
    kind: SpectrumKind,
    source: Source,
    spectra: Vec<Spectrum>,
    labels: Vec<f64>,
    sample_sources: Vec<Source>,
}

impl SpectralDataset {
    pub fn new(
        grid: WavelengthGrid,
        source: Source,
        spectra: Vec<Spectrum>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        let sample_sources = vec![source; spectra.len()];
        Self::with_sample_sources(grid, source, spectra, labels, sample_sources)
    }

    pub fn with_sample_sources(
        grid: WavelengthGrid,
        source: Source,
        spectra: Vec<Spectrum>,
        labels: Vec<f64>,
        sample_sources: Vec<Source>,
    ) -> Result<Self> {
        let first = spectra.first().ok_or(Error::EmptyInput)?;
        if labels.len() != spectra.len() {
            return Err(Error::LengthMismatch { left: spectra.len(), right: labels.len() });
        }
        if sample_sources.len() != spectra.len() {
            return Err(Error::LengthMismatch { left: spectra.len(), right: sample_sources.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l < 0.0) {
            return Err(Error::NegativeContent(bad));
        }
        let kind = first.kind;
        let n_points = grid.n_points();
        for s in &spectra {
            if s.kind != kind {
                return Err(Error::KindMismatch(format!(
                    "sample {:?} is {} but dataset is {}",
                    s.sample_id, s.kind, kind
                )));
            }
            if s.len() != n_points {
                return Err(Error::GridMismatch(format!(
                    "sample {:?} has {} points, grid has {}",
                    s.sample_id,
                    s.len(),
                    n_points
                )));
            }
        }
        Ok(Self { grid, kind, source, spectra, labels, sample_sources })
    }

    /// A dataset with no samples, e.g. the identity for merging.
    pub fn empty(grid: WavelengthGrid, kind: SpectrumKind, source: Source) -> Self {
        Self { grid, kind, source, spectra: Vec::new(), labels: Vec::new(), sample_sources: Vec::new() }
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sample_sources(&self) -> &[Source] {
        &self.sample_sources
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.spectra.iter().map(|s| s.sample_id.as_str())
    }

    /// Row-major `n × n_points` copy of the spectral values.
    pub fn to_matrix(&self) -> Vec<f64> {
        self.spectra.iter().flat_map(|s| s.values.iter().copied()).collect()
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::with_sample_sources(
            self.grid,
            self.source,
            indices.iter().map(|&i| self.spectra[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.sample_sources[i]).collect(),
        )
    }

    /// Replace every spectrum, keeping labels and provenance.
    pub(crate) fn map_spectra(&self, spectra: Vec<Spectrum>) -> Result<Self> {
        Self::with_sample_sources(
            self.grid,
            self.source,
            spectra,
            self.labels.clone(),
            self.sample_sources.clone(),
        )
    }
}

/// `A = log10(1 / R)` with `R` taken as a fraction, so 100 % maps to 0.
pub fn to_absorbance(s: &Spectrum) -> Result<Spectrum> {
    if s.kind != SpectrumKind::ReflectancePct {
        return Err(Error::WrongKind {
            expected: SpectrumKind::ReflectancePct.to_string(),
            found: s.kind.to_string(),
        });
    }
    let mut out = Vec::with_capacity(s.len());
    for (index, &r) in s.values.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::NonPositiveReflectance { index, value: r });
        }
        out.push(-(r / 100.0).log10());
    }
    Ok(s.with_values(SpectrumKind::Absorbance, out))
}

/// Inverse of [`to_absorbance`]: `R = 100 · 10^(−A)`.
pub fn to_reflectance(s: &Spectrum) -> Result<Spectrum> {
    if s.kind != SpectrumKind::Absorbance {
        return Err(Error::WrongKind {
            expected: SpectrumKind::Absorbance.to_string(),
            found: s.kind.to_string(),
        });
    }
    let values = s.values.iter().map(|a| 100.0 * 10f64.powf(-a)).collect();
    Ok(s.with_values(SpectrumKind::ReflectancePct, values))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RejectReason {
    NonFinite,
    NonPositive(f64),
    AboveHundred(f64),
    MissingLabel,
    NegativeLabel(f64),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NonFinite => f.write_str("NonFinite"),
            RejectReason::NonPositive(v) => write!(f, "NonPositive({v})"),
            RejectReason::AboveHundred(v) => write!(f, "AboveHundred({v})"),
            RejectReason::MissingLabel => f.write_str("MissingLabel"),
            RejectReason::NegativeLabel(v) => write!(f, "NegativeLabel({v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub sample_id: String,
    /// Offending spectral index, when the problem is in the spectrum.
    pub index: Option<usize>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionLog {
    pub entries: Vec<Rejection>,
}

impl RejectionLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Line-oriented `sample_id<TAB>reason` text, one line per rejected sample.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| match e.index {
                Some(i) => format!("{}\t{} at index {i}\n", e.sample_id, e.reason),
                None => format!("{}\t{}\n", e.sample_id, e.reason),
            })
            .collect()
    }
}

fn first_violation(values: &[f64]) -> Option<(usize, RejectReason)> {
    values.iter().enumerate().find_map(|(i, &v)| {
        if !v.is_finite() {
            Some((i, RejectReason::NonFinite))
        } else if v <= 0.0 {
            Some((i, RejectReason::NonPositive(v)))
        } else if v > 100.0 {
            Some((i, RejectReason::AboveHundred(v)))
        } else {
            None
        }
    })
}

/// Drop every reflectance spectrum with a value outside (0, 100] or a
/// non-finite value. Retained samples are passed through untouched.
pub fn screen(d: &SpectralDataset) -> Result<(SpectralDataset, RejectionLog)> {
    if d.kind() != SpectrumKind::ReflectancePct {
        return Err(Error::WrongKind {
            expected: SpectrumKind::ReflectancePct.to_string(),
            found: d.kind().to_string(),
        });
    }
    let mut log = RejectionLog::default();
    let mut keep = Vec::with_capacity(d.len());
    for (i, s) in d.spectra().iter().enumerate() {
        match first_violation(&s.values) {
            None => keep.push(i),
            Some((index, reason)) => log.entries.push(Rejection {
                sample_id: s.sample_id.clone(),
                index: Some(index),
                reason,
            }),
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyAfterScreening);
    }
    Ok((d.subset(&keep)?, log))
}

/// g/kg → g/100g.
pub fn normalize_carbonate_units(g_per_kg: f64) -> Result<f64> {
    if !(g_per_kg >= 0.0) {
        return Err(Error::NegativeContent(g_per_kg));
    }
    Ok(g_per_kg / 10.0)
}
