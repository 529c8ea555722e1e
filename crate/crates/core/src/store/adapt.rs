//! Adapters for wide CSV exports of the KSSL and LUCAS spectral libraries.
//!
//! Each export has one row per sample, a sample id column, a carbonate
//! column and one column per wavelength (header = wavelength in nm, with an
//! optional prefix such as `spc.`). Other columns are ignored.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::canonical::parse_value;
use crate::error::{Error, Result};
use crate::spectral::{
    to_absorbance, RejectReason, Rejection, RejectionLog, Source, SpectralDataset, Spectrum, SpectrumKind,
    WavelengthGrid,
};

/// How KSSL reflectance is expressed in the export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectanceUnit {
    Percent,
    Fraction,
}

impl std::str::FromStr for ReflectanceUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "percent" | "pct" | "%" => Ok(ReflectanceUnit::Percent),
            "fraction" | "frac" => Ok(ReflectanceUnit::Fraction),
            other => Err(Error::InvalidParams(format!("unknown reflectance unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterOptions {
    pub id_column: String,
    pub label_column: String,
    pub wavelength_prefix: String,
    /// Required for KSSL; ignored for LUCAS.
    pub unit: Option<ReflectanceUnit>,
}

impl AdapterOptions {
    /// KSSL defaults; the label column is expected in g/100g.
    pub fn kssl() -> Self {
        Self { id_column: "sample_id".into(), label_column: "caco3".into(), wavelength_prefix: String::new(), unit: None }
    }

    /// LUCAS defaults; the label column is expected in g/kg.
    pub fn lucas() -> Self {
        Self { id_column: "PointID".into(), label_column: "CaCO3".into(), wavelength_prefix: String::new(), unit: None }
    }
}

/// A parsed wide export before unit handling.
struct WideTable {
    wavelengths: Vec<f64>,
    ids: Vec<String>,
    labels: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn read_wide<R: Read>(reader: R, opts: &AdapterOptions) -> Result<WideTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { row: 1, column: 0, message: e.to_string() })?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let id_col = find(&opts.id_column);
    let label_col = find(&opts.label_column);
    let mut wl_cols: Vec<(usize, f64)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != id_col && Some(*i) != label_col)
        .filter_map(|(i, h)| h.trim().strip_prefix(opts.wavelength_prefix.as_str())?.parse::<f64>().ok().map(|nm| (i, nm)))
        .filter(|(_, nm)| nm.is_finite())
        .collect();
    let mut missing = Vec::new();
    if id_col.is_none() {
        missing.push(opts.id_column.clone());
    }
    if label_col.is_none() {
        missing.push(opts.label_column.clone());
    }
    if wl_cols.len() < 2 {
        missing.push(format!("{}<wavelength nm>", opts.wavelength_prefix));
    }
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let (id_col, label_col) = (id_col.expect("checked"), label_col.expect("checked"));
    wl_cols.sort_by(|a, b| a.1.total_cmp(&b.1));
    if let Some(w) = wl_cols.windows(2).find(|w| w[1].1 <= w[0].1) {
        return Err(Error::GridMismatch(format!("duplicate wavelength column {} nm", w[1].1)));
    }

    let mut table = WideTable {
        wavelengths: wl_cols.iter().map(|c| c.1).collect(),
        ids: Vec::new(),
        labels: Vec::new(),
        rows: Vec::new(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, column: 0, message: e.to_string() })?;
        let id = rec[id_col].trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, column: id_col, message: "empty sample id".into() });
        }
        let label_cell = rec[label_col].trim();
        let label = if label_cell.is_empty() || label_cell.eq_ignore_ascii_case("na") {
            f64::NAN
        } else {
            parse_value(label_cell).map_err(|message| Error::Parse { row, column: label_col, message })?
        };
        let values = wl_cols
            .iter()
            .map(|&(c, _)| {
                let cell = rec[c].trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    Ok(f64::NAN)
                } else {
                    parse_value(cell).map_err(|message| Error::Parse { row, column: c, message })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        table.ids.push(id);
        table.labels.push(label);
        table.rows.push(values);
    }
    if table.ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(table)
}

/// Linear interpolation of `(src_nm, values)` onto `grid`.
///
/// The source must cover the grid; a target point at most one source step
/// beyond either end takes the end value.
pub fn resample_to_grid(src_nm: &[f64], values: &[f64], grid: &WavelengthGrid) -> Result<Vec<f64>> {
    if src_nm.len() != values.len() {
        return Err(Error::LengthMismatch { left: src_nm.len(), right: values.len() });
    }
    let n = src_nm.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: n });
    }
    if src_nm.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch("source wavelengths must be strictly increasing".into()));
    }
    let lo_limit = src_nm[0] - (src_nm[1] - src_nm[0]);
    let hi_limit = src_nm[n - 1] + (src_nm[n - 1] - src_nm[n - 2]);
    if grid.start_nm < lo_limit || grid.end_nm > hi_limit {
        return Err(Error::GridMismatch(format!(
            "source covers {}–{} nm, target needs {}–{} nm",
            src_nm[0], src_nm[n - 1], grid.start_nm, grid.end_nm
        )));
    }
    let mut out = Vec::with_capacity(grid.n_points());
    let mut j = 0;
    for i in 0..grid.n_points() {
        let x = grid.wavelength(i);
        if x <= src_nm[0] {
            out.push(values[0]);
            continue;
        }
        if x >= src_nm[n - 1] {
            out.push(values[n - 1]);
            continue;
        }
        while src_nm[j + 1] < x {
            j += 1;
        }
        let (x0, x1) = (src_nm[j], src_nm[j + 1]);
        let t = (x - x0) / (x1 - x0);
        out.push(if t == 1.0 { values[j + 1] } else { values[j] + t * (values[j + 1] - values[j]) });
    }
    Ok(out)
}

fn reject(log: &mut RejectionLog, id: &str, index: Option<usize>, reason: RejectReason) {
    log.entries.push(Rejection { sample_id: id.to_string(), index, reason });
}

fn label_problem(label: f64) -> Option<RejectReason> {
    if label.is_nan() {
        Some(RejectReason::MissingLabel)
    } else if label < 0.0 {
        Some(RejectReason::NegativeLabel(label))
    } else {
        None
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateSampleId(id.clone()));
        }
    }
    Ok(())
}

/// KSSL export in percent or fractional reflectance → absorbance on the
/// standard grid. Spectra with values outside (0, 100] % or missing values,
/// and samples without a valid label, are logged and dropped.
pub fn read_kssl<R: Read>(reader: R, opts: &AdapterOptions) -> Result<(SpectralDataset, RejectionLog)> {
    let unit = opts.unit.ok_or(Error::UnitFlagRequired)?;
    let t = read_wide(reader, opts)?;
    check_unique(&t.ids)?;
    let grid = WavelengthGrid::NIR;
    let factor = match unit {
        ReflectanceUnit::Percent => 1.0,
        ReflectanceUnit::Fraction => 100.0,
    };
    let mut log = RejectionLog::default();
    let (mut spectra, mut labels) = (Vec::new(), Vec::new());
    for ((id, &label), row) in t.ids.iter().zip(&t.labels).zip(&t.rows) {
        if let Some(reason) = label_problem(label) {
            reject(&mut log, id, None, reason);
            continue;
        }
        let pct: Vec<f64> = row.iter().map(|v| v * factor).collect();
        let bad = pct.iter().enumerate().find_map(|(i, &v)| {
            let in_window = t.wavelengths[i] >= grid.start_nm - 10.0;
            if !in_window {
                None
            } else if !v.is_finite() {
                Some((i, RejectReason::NonFinite))
            } else if v <= 0.0 {
                Some((i, RejectReason::NonPositive(v)))
            } else if v > 100.0 {
                Some((i, RejectReason::AboveHundred(v)))
            } else {
                None
            }
        });
        if let Some((i, reason)) = bad {
            reject(&mut log, id, Some(i), reason);
            continue;
        }
        let refl = resample_to_grid(&t.wavelengths, &pct, &grid)?;
        spectra.push(to_absorbance(&Spectrum::new(id.clone(), SpectrumKind::ReflectancePct, refl)).map_err(|e| e.in_sample(id))?);
        labels.push(label);
    }
    if spectra.is_empty() {
        return Err(Error::EmptyAfterScreening);
    }
    Ok((SpectralDataset::new(grid, Source::Kssl, spectra, labels)?, log))
}

/// LUCAS export (absorbance, labels in g/kg) → absorbance on the standard
/// grid with labels in g/100g.
pub fn read_lucas<R: Read>(reader: R, opts: &AdapterOptions) -> Result<(SpectralDataset, RejectionLog)> {
    let t = read_wide(reader, opts)?;
    check_unique(&t.ids)?;
    let grid = WavelengthGrid::NIR;
    let mut log = RejectionLog::default();
    let (mut spectra, mut labels) = (Vec::new(), Vec::new());
    for ((id, &label), row) in t.ids.iter().zip(&t.labels).zip(&t.rows) {
        if let Some(reason) = label_problem(label) {
            reject(&mut log, id, None, reason);
            continue;
        }
        if let Some(i) = row
            .iter()
            .enumerate()
            .position(|(i, v)| t.wavelengths[i] >= grid.start_nm - 10.0 && !v.is_finite())
        {
            reject(&mut log, id, Some(i), RejectReason::NonFinite);
            continue;
        }
        let values = resample_to_grid(&t.wavelengths, row, &grid)?;
        spectra.push(Spectrum::new(id.clone(), SpectrumKind::Absorbance, values));
        labels.push(crate::spectral::normalize_carbonate_units(label)?);
    }
    if spectra.is_empty() {
        return Err(Error::EmptyAfterScreening);
    }
    Ok((SpectralDataset::new(grid, Source::Lucas, spectra, labels)?, log))
}

pub fn adapt_kssl(path: impl AsRef<Path>, opts: &AdapterOptions) -> Result<(SpectralDataset, RejectionLog)> {
    if opts.unit.is_none() {
        return Err(Error::UnitFlagRequired);
    }
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_kssl(BufReader::new(f), opts)
}

pub fn adapt_lucas(path: impl AsRef<Path>, opts: &AdapterOptions) -> Result<(SpectralDataset, RejectionLog)> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lucas(BufReader::new(f), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_within_one_step() {
        let src: Vec<f64> = (0..676).map(|i| 1150.0 + 2.0 * i as f64).collect();
        let src: Vec<f64> = src.into_iter().filter(|&w| w < 2500.0).collect();
        let vals: Vec<f64> = src.iter().map(|w| w * 0.5).collect();
        let out = resample_to_grid(&src, &vals, &WavelengthGrid::NIR).unwrap();
        assert_eq!(out[2700], *vals.last().unwrap());
        let short: Vec<f64> = src.iter().copied().filter(|&w| w < 2400.0).collect();
        assert!(matches!(
            resample_to_grid(&short, &vals[..short.len()], &WavelengthGrid::NIR),
            Err(Error::GridMismatch(_))
        ));
    }
}
