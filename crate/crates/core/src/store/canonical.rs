//! The canonical wide CSV: `sample_id`, `carbonate_g100g`, then one column
//! per wavelength of the standard grid.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::spectral::{Source, SpectralDataset, Spectrum, SpectrumKind, WavelengthGrid};

pub const ID_COLUMN: &str = "sample_id";
pub const LABEL_COLUMN: &str = "carbonate_g100g";

/// Column label for a wavelength, e.g. `1150.0` or `1150.5`.
pub fn wavelength_label(nm: f64) -> String {
    format!("{nm:.1}")
}

pub fn canonical_header(grid: &WavelengthGrid) -> Vec<String> {
    let mut h = vec![ID_COLUMN.to_string(), LABEL_COLUMN.to_string()];
    h.extend(grid.wavelengths().into_iter().map(wavelength_label));
    h
}

fn check_header(header: &csv::StringRecord, grid: &WavelengthGrid) -> Result<()> {
    let expected = canonical_header(grid);
    for (column, want) in expected.iter().enumerate() {
        let found = header.get(column).unwrap_or("").trim();
        if found == want {
            continue;
        }
        if column >= 2
            && found.parse::<f64>().is_ok_and(f64::is_finite) {
                return Err(Error::GridMismatch(format!("column {column}: expected {want} nm, found {found} nm")));
            }
        return Err(Error::HeaderMismatch { column, expected: want.clone(), found: found.to_string() });
    }
    if header.len() > expected.len() {
        return Err(Error::HeaderMismatch {
            column: expected.len(),
            expected: String::new(),
            found: header[expected.len()].to_string(),
        });
    }
    Ok(())
}

/// Parse a label cell; empty or `NA` means unknown (`NaN`).
pub(crate) fn parse_label(cell: &str) -> std::result::Result<f64, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(f64::NAN);
    }
    let v: f64 = cell.parse().map_err(|_| format!("cannot parse {cell:?} as a number"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {cell:?}"));
    }
    if v < 0.0 {
        return Err(Error::NegativeContent(v).to_string());
    }
    Ok(v)
}

pub(crate) fn parse_value(cell: &str) -> std::result::Result<f64, String> {
    let cell = cell.trim();
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite value {cell:?}")),
        Err(_) => Err(format!("cannot parse {cell:?} as a number")),
    }
}

/// Read a canonical CSV whose spectra are of `kind`. Row numbers in errors
/// are 1-based file lines (the header is line 1).
pub fn read_canonical<R: Read>(reader: R, kind: SpectrumKind) -> Result<SpectralDataset> {
    let grid = WavelengthGrid::NIR;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Parse { row: 1, column: 0, message: e.to_string() })?,
        None => return Err(Error::HeaderMismatch { column: 0, expected: ID_COLUMN.into(), found: String::new() }),
    };
    check_header(&header, &grid)?;
    let width = header.len();
    let mut spectra = Vec::new();
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, column: 0, message: e.to_string() })?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                column: rec.len().min(width),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, column: 0, message: "empty sample id".into() });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSampleId(id));
        }
        let label = parse_label(&rec[1]).map_err(|message| Error::Parse { row, column: 1, message })?;
        let values = rec
            .iter()
            .enumerate()
            .skip(2)
            .map(|(column, cell)| parse_value(cell).map_err(|message| Error::Parse { row, column, message }))
            .collect::<Result<Vec<f64>>>()?;
        spectra.push(Spectrum::new(id, kind, values));
        labels.push(label);
    }
    if spectra.is_empty() {
        return Err(Error::EmptyInput);
    }
    SpectralDataset::new(grid, Source::Local, spectra, labels)
}

pub fn load_canonical(path: impl AsRef<Path>, kind: SpectrumKind) -> Result<SpectralDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_canonical(BufReader::new(file), kind)
}

/// Write with shortest round-trip formatting, which reproduces every value
/// exactly on reading.
pub fn write_canonical<W: Write>(d: &SpectralDataset, out: W) -> Result<()> {
    if *d.grid() != WavelengthGrid::NIR {
        return Err(Error::GridMismatch(format!("dataset grid {:?} is not the standard grid", d.grid())));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let wrap = |e: csv::Error| Error::Container(format!("csv write failed: {e}"));
    w.write_record(canonical_header(d.grid())).map_err(wrap)?;
    let mut fields = Vec::with_capacity(d.grid().n_points() + 2);
    for (s, &label) in d.spectra().iter().zip(d.labels()) {
        fields.clear();
        fields.push(s.sample_id.clone());
        fields.push(if label.is_nan() { String::new() } else { format!("{label}") });
        fields.extend(s.values.iter().map(|v| format!("{v}")));
        w.write_record(&fields).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Container(format!("csv flush failed: {e}")))
}

pub fn save_canonical(d: &SpectralDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_canonical(d, &mut buf)?;
    write_atomic(path.as_ref(), &buf)
}
