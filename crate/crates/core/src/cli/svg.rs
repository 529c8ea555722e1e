//! Deterministic SVG rendering of spectra and saliency maps.

use std::fmt::Write as _;

use crate::neural::SaliencyMap;

/// Carbonate-related absorption bands marked on spectrum plots, in nm.
pub const MARKER_LINES_NM: [f64; 5] = [1415.0, 1900.0, 2000.0, 2160.0, 2340.0];
/// Broad carbonate band at the long-wavelength end, in nm.
pub const MARKER_BAND_NM: (f64, f64) = (2500.0, 2550.0);

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    plot_h: f64,
}

impl Frame {
    fn new(wl: &[f64], values: &[f64], plot_h: f64) -> Self {
        let x0 = wl.first().copied().unwrap_or(0.0);
        let x1 = wl.last().copied().unwrap_or(1.0);
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (y0, y1) = if !lo.is_finite() {
            (-1.0, 1.0)
        } else if hi > lo {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo - pad, hi + pad)
        };
        Self { x0, x1: if x1 > x0 { x1 } else { x0 + 1.0 }, y0, y1, plot_h }
    }

    fn x(&self, nm: f64) -> f64 {
        LEFT + (nm - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.y1 - v) / (self.y1 - self.y0) * self.plot_h
    }

    fn axes(&self, s: &mut String, ylabel: &str) {
        let bottom = TOP + self.plot_h;
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333" stroke-width="1"/>"##,
            WIDTH - LEFT - RIGHT,
            self.plot_h
        );
        let first = (self.x0 / 100.0).ceil() as i64 * 100;
        let mut t = first;
        while (t as f64) <= self.x1 {
            let x = self.x(t as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
                bottom + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t}</text>"#,
                bottom + 18.0
            );
            t += 100;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">Wavelength (nm)</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            bottom + 38.0
        );
        for (v, y) in [(self.y1, TOP), (self.y0, bottom)] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + self.plot_h / 2.0,
            TOP + self.plot_h / 2.0,
            escape(ylabel)
        );
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn header(s: &mut String, title: &str, height: f64) {
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(title));
}

fn polyline_points(frame: &Frame, wl: &[f64], values: &[f64]) -> String {
    let mut pts = String::with_capacity(values.len() * 16);
    for (i, (&nm, &v)) in wl.iter().zip(values).enumerate() {
        if i > 0 {
            pts.push(' ');
        }
        let _ = write!(pts, "{:.2},{:.2}", frame.x(nm), frame.y(v));
    }
    pts
}

/// Line plot of one spectrum, optionally with dashed carbonate band markers.
pub fn plot_spectrum(title: &str, ylabel: &str, wl: &[f64], values: &[f64], markers: bool) -> String {
    let plot_h = HEIGHT - TOP - BOTTOM;
    let frame = Frame::new(wl, values, plot_h);
    let mut s = String::new();
    header(&mut s, title, HEIGHT);
    frame.axes(&mut s, ylabel);
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f4e9a" stroke-width="1" points="{}"/>"##,
        polyline_points(&frame, wl, values)
    );
    if markers {
        write_markers(&mut s, &frame);
    }
    s.push_str("</svg>\n");
    s
}

fn write_markers(s: &mut String, frame: &Frame) {
    let bottom = TOP + frame.plot_h;
    let in_range = |nm: f64| nm >= frame.x0 && nm <= frame.x1;
    for nm in MARKER_LINES_NM.iter().copied().filter(|&nm| in_range(nm)) {
        let x = frame.x(nm);
        let _ = writeln!(
            s,
            r##"<line class="marker" data-nm="{nm}" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{bottom:.2}" stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="#555555">{nm}</text>"##,
            x + 2.0,
            TOP + 12.0
        );
    }
    let (a, b) = MARKER_BAND_NM;
    let (lo, hi) = (a.max(frame.x0), b.min(frame.x1));
    if lo <= hi {
        let (xa, xb) = (frame.x(lo), frame.x(hi));
        let _ = writeln!(
            s,
            r##"<line class="marker" data-nm="{a}-{b}" x1="{xa:.2}" y1="{TOP}" x2="{xa:.2}" y2="{bottom:.2}" stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>"##
        );
        if xb > xa {
            let _ = writeln!(
                s,
                r##"<rect x="{xa:.2}" y="{TOP}" width="{:.2}" height="{:.2}" fill="#888888" fill-opacity="0.15"/>"##,
                xb - xa,
                frame.plot_h
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="#555555" text-anchor="end">{a}–{b}</text>"##,
            xa - 2.0,
            TOP + 24.0
        );
    }
}

/// Red for 1, light blue for 0.
fn heat(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |lo: f64, hi: f64| (lo + (hi - lo) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(173.0, 214.0), lerp(216.0, 39.0), lerp(230.0, 40.0))
}

/// Spectrum coloured by normalised saliency plus a table of the top peaks.
pub fn plot_saliency(title: &str, ylabel: &str, values: &[f64], map: &SaliencyMap, top: usize) -> String {
    let peaks = map.top_peaks(top);
    let plot_h = HEIGHT - TOP - BOTTOM;
    let table_h = 30.0 + 16.0 * peaks.len() as f64;
    let total_h = HEIGHT + table_h;
    let wl = &map.wavelengths_nm;
    let frame = Frame::new(wl, values, plot_h);
    let max = map.magnitude.iter().copied().fold(0.0, f64::max);
    let mut s = String::new();
    header(&mut s, title, total_h);
    frame.axes(&mut s, ylabel);
    let _ = writeln!(s, r#"<g stroke-width="1.5" fill="none">"#);
    for i in 1..values.len().min(wl.len()) {
        let t = if max > 0.0 { 0.5 * (map.magnitude[i - 1] + map.magnitude[i]) / max } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
            frame.x(wl[i - 1]),
            frame.y(values[i - 1]),
            frame.x(wl[i]),
            frame.y(values[i]),
            heat(t)
        );
    }
    let _ = writeln!(s, "</g>");
    for (nm, _) in peaks {
        let x = frame.x(*nm);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#d62728" stroke-width="0.8" stroke-dasharray="2 2"/>"##,
            TOP + plot_h
        );
    }
    let y0 = HEIGHT + 10.0;
    let _ = writeln!(s, r#"<g class="peaks" font-size="12" font-family="monospace">"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="{y0:.2}">rank  wavelength_nm  saliency</text>"#);
    for (rank, (nm, mag)) in peaks.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text class="peak" data-rank="{}" data-nm="{nm}" data-magnitude="{mag}" x="{LEFT}" y="{:.2}">{:>4}  {:>13.1}  {:.6e}</text>"#,
            rank + 1,
            y0 + 16.0 * (rank + 1) as f64,
            rank + 1,
            nm,
            mag
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_endpoints() {
        assert_eq!(heat(1.0), "#d62728");
        assert_eq!(heat(0.0), "#add8e6");
    }

    #[test]
    fn constant_spectrum_is_flat() {
        let wl = [1150.0, 1150.5, 1151.0];
        let svg = plot_spectrum("c", "A", &wl, &[0.5; 3], false);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }
}
