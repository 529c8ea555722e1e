//! Bundled reference measurements: nineteen soil samples with volumetric
//! (calcimeter) carbonate content and MLP predictions, and one sample with
//! an XRD-derived carbonate estimate.

use std::fmt::Write as _;

use crate::error::Result;
use crate::metrics::xrd_total_carbonates;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    /// Carbonate-rich samples.
    Sam1,
    /// Carbonate-poor samples.
    Sam2,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::Sam1 => "SAM-1",
            Group::Sam2 => "SAM-2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub id: &'static str,
    /// Volumetric measurement, g/100g.
    pub experimental: f64,
    /// MLP prediction, g/100g.
    pub predicted: f64,
    pub group: Group,
}

const fn row(id: &'static str, experimental: f64, predicted: f64, group: Group) -> ReferenceRow {
    ReferenceRow { id, experimental, predicted, group }
}

pub const TABLE1: [ReferenceRow; 19] = [
    row("S01", 7.85, 11.53, Group::Sam1),
    row("S02", 1.83, 0.86, Group::Sam1),
    row("S03", 8.56, 8.80, Group::Sam1),
    row("S04", 10.84, 5.85, Group::Sam1),
    row("S05", 9.32, 8.37, Group::Sam1),
    row("S06", 4.63, 1.64, Group::Sam1),
    row("S07", 3.39, 1.52, Group::Sam1),
    row("S08", 5.75, 3.31, Group::Sam1),
    row("S09", 1.18, 1.07, Group::Sam1),
    row("S10", 18.14, 13.44, Group::Sam1),
    row("S11", 11.28, 14.18, Group::Sam1),
    row("S12", 17.32, 14.38, Group::Sam1),
    row("S13", 17.00, 18.57, Group::Sam1),
    row("S14", 1.12, 1.80, Group::Sam1),
    row("S15", 0.07, 0.60, Group::Sam2),
    row("S16", 0.13, 0.59, Group::Sam2),
    row("S17", 0.13, 0.53, Group::Sam2),
    row("S18", 0.09, 0.51, Group::Sam2),
    row("S19", 0.04, 0.51, Group::Sam2),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub ids: Vec<&'static str>,
    pub experimental: Vec<f64>,
    pub predicted: Vec<f64>,
    pub groups: Vec<Group>,
}

pub fn load_reference_table1() -> ReferenceTable {
    ReferenceTable {
        ids: TABLE1.iter().map(|r| r.id).collect(),
        experimental: TABLE1.iter().map(|r| r.experimental).collect(),
        predicted: TABLE1.iter().map(|r| r.predicted).collect(),
        groups: TABLE1.iter().map(|r| r.group).collect(),
    }
}

/// Largest allowed spread between the XRD, volumetric and MLP values.
pub const AGREEMENT_BAND: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct XrdComparison {
    pub sample_id: &'static str,
    pub calcite_wt_pct: f64,
    pub hydromagnesite_wt_pct: f64,
    pub crystalline_wt_pct: f64,
    pub crystalline_index: f64,
    pub xrd_total: f64,
    pub volumetric: f64,
    pub mlp: f64,
    pub max_gap: f64,
    pub within_band: bool,
}

/// Sample S03: crystalline carbonates from XRD corrected by the
/// crystalline index, against the volumetric and MLP values.
pub fn xrd_comparison() -> Result<XrdComparison> {
    let (calcite, hydromagnesite, crystalline, ci) = (3.88, 2.19, 6.07, 0.72);
    let xrd_total = xrd_total_carbonates(crystalline, ci)?;
    let s03 = TABLE1[2];
    let values = [xrd_total, s03.experimental, s03.predicted];
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_gap = max - min;
    Ok(XrdComparison {
        sample_id: s03.id,
        calcite_wt_pct: calcite,
        hydromagnesite_wt_pct: hydromagnesite,
        crystalline_wt_pct: crystalline,
        crystalline_index: ci,
        xrd_total,
        volumetric: s03.experimental,
        mlp: s03.predicted,
        max_gap,
        within_band: max_gap < AGREEMENT_BAND,
    })
}

impl XrdComparison {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sample_id={}", self.sample_id);
        let _ = writeln!(s, "calcite_wt_pct={}", self.calcite_wt_pct);
        let _ = writeln!(s, "hydromagnesite_wt_pct={}", self.hydromagnesite_wt_pct);
        let _ = writeln!(s, "crystalline_wt_pct={}", self.crystalline_wt_pct);
        let _ = writeln!(s, "crystalline_index={}", self.crystalline_index);
        let _ = writeln!(s, "xrd_total={:.2}", self.xrd_total);
        let _ = writeln!(s, "volumetric={}", self.volumetric);
        let _ = writeln!(s, "mlp={}", self.mlp);
        let _ = writeln!(s, "max_gap={:.4}", self.max_gap);
        let _ = writeln!(s, "agreement_band={AGREEMENT_BAND}");
        let _ = writeln!(s, "within_band={}", self.within_band);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "sample_id": self.sample_id,
            "calcite_wt_pct": self.calcite_wt_pct,
            "hydromagnesite_wt_pct": self.hydromagnesite_wt_pct,
            "crystalline_wt_pct": self.crystalline_wt_pct,
            "crystalline_index": self.crystalline_index,
            "xrd_total": self.xrd_total,
            "volumetric": self.volumetric,
            "mlp": self.mlp,
            "max_gap": self.max_gap,
            "agreement_band": AGREEMENT_BAND,
            "within_band": self.within_band,
        })
        .to_string()
    }
}
