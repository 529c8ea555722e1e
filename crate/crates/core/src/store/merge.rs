//! Concatenation of spectral libraries.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::metrics::wasserstein;
use crate::spectral::{Source, SpectralDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct MergeReport {
    pub n_a: usize,
    pub n_b: usize,
    pub n_total: usize,
    /// W1 distance between the two label distributions (finite labels only);
    /// `None` when either side has none.
    pub label_wasserstein: Option<f64>,
}

impl MergeReport {
    pub fn to_key_value(&self) -> String {
        let w = self.label_wasserstein.map_or("NA".to_string(), |w| format!("{w}"));
        format!("n_a={}\nn_b={}\nn_total={}\nlabel_wasserstein={w}\n", self.n_a, self.n_b, self.n_total)
    }
}

/// `a`'s samples followed by `b`'s. Per-sample sources are kept and the
/// result is tagged [`Source::Merged`]; merging with an empty dataset
/// returns the other one unchanged.
pub fn merge(a: &SpectralDataset, b: &SpectralDataset) -> Result<(SpectralDataset, MergeReport)> {
    if a.kind() != b.kind() {
        return Err(Error::KindMismatch(format!("cannot merge {} with {}", a.kind(), b.kind())));
    }
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!("cannot merge grids {:?} and {:?}", a.grid(), b.grid())));
    }
    let ids: HashSet<&str> = a.sample_ids().collect();
    if let Some(dup) = b.sample_ids().find(|id| ids.contains(id)) {
        return Err(Error::DuplicateSampleId(dup.to_string()));
    }
    let finite = |d: &SpectralDataset| d.labels().iter().copied().filter(|v| v.is_finite()).collect::<Vec<_>>();
    let (la, lb) = (finite(a), finite(b));
    let label_wasserstein = if la.is_empty() || lb.is_empty() { None } else { Some(wasserstein(&la, &lb, 1)?) };
    let report = MergeReport { n_a: a.len(), n_b: b.len(), n_total: a.len() + b.len(), label_wasserstein };
    if b.is_empty() {
        return Ok((a.clone(), report));
    }
    if a.is_empty() {
        return Ok((b.clone(), report));
    }
    let spectra = a.spectra().iter().chain(b.spectra()).cloned().collect();
    let labels = a.labels().iter().chain(b.labels()).copied().collect();
    let sources = a.sample_sources().iter().chain(b.sample_sources()).copied().collect();
    let merged = SpectralDataset::with_sample_sources(*a.grid(), Source::Merged, spectra, labels, sources)?;
    Ok((merged, report))
}
