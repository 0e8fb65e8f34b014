//! Plots and tables derived from a run directory.
//!
//! Every output is a pure function of the dataset, so regenerating a report
//! rewrites identical bytes.

use std::fmt::Write as _;

use lagbo::driver::{Dataset, RunMode};
use lagbo::lagrange::UpperHull;

pub const SCATTER_SVG: &str = "scatter.svg";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const FRONTIER_SVG: &str = "frontier.svg";
pub const FRONTIER_CSV: &str = "frontier.csv";

/// Colour of the first acquisition.
pub const RAMP_START: (u8, u8, u8) = (0x00, 0x42, 0x9d);
/// Colour of the last acquisition.
pub const RAMP_END: (u8, u8, u8) = (0xd7, 0x19, 0x1c);

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Linear RGB blend along the ramp, `t` in `[0, 1]`.
pub fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(RAMP_START.0, RAMP_END.0),
        mix(RAMP_START.1, RAMP_END.1),
        mix(RAMP_START.2, RAMP_END.2)
    )
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        // pad degenerate and tight extents so single points sit mid-plot
        let pad = |lo: f64, hi: f64| {
            let span = hi - lo;
            let p = if span > 0.0 {
                0.05 * span
            } else {
                0.5 * lo.abs().max(1.0)
            };
            (lo - p, hi + p)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(out: &mut String, title: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<title>{title}</title>"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{b}" x2="{l}" y2="{t}"/></g>"#
    );
    let _ = writeln!(out, r#"<g class="ticks" font-family="sans-serif" font-size="11">"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x0 + f * (frame.x1 - frame.x0);
        let yv = frame.y0 + f * (frame.y1 - frame.y0);
        let (xp, yp) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            out,
            r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{xv:.1}</text>"#,
            b + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{yp:.2}" text-anchor="end">{yv:.0}</text>"#,
            l - 6.0
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">BV (V)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">FOM (kW/mm²)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

/// FOM against BV for every valid record, coloured by acquisition order.
pub fn scatter_svg(ds: &Dataset) -> String {
    let valid: Vec<_> = ds.records().iter().filter(|r| r.eval.valid).collect();
    let frame = Frame::around(valid.iter().map(|r| (r.eval.bv, r.eval.fom)));
    let mut out = String::new();
    open_svg(&mut out, "FOM vs BV by iteration", &frame);
    let _ = writeln!(out, r#"<g class="markers">"#);
    let last = valid.len().saturating_sub(1).max(1) as f64;
    for (k, r) in valid.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle class="marker" data-iteration="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            r.iteration,
            frame.px(r.eval.bv),
            frame.py(r.eval.fom),
            ramp(k as f64 / last)
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

/// All valid records in grey with the upper hull drawn over them.
pub fn frontier_svg(ds: &Dataset, hull: &UpperHull) -> String {
    let valid: Vec<_> = ds.records().iter().filter(|r| r.eval.valid).collect();
    let frame = Frame::around(valid.iter().map(|r| (r.eval.bv, r.eval.fom)));
    let mut out = String::new();
    open_svg(&mut out, "FOM vs BV upper frontier", &frame);
    let _ = writeln!(out, r##"<g class="data" fill="#b0b0b0">"##);
    for r in &valid {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
            frame.px(r.eval.bv),
            frame.py(r.eval.fom)
        );
    }
    let _ = writeln!(out, "</g>");
    let coords: Vec<String> = hull
        .points()
        .iter()
        .map(|p| format!("{:.2},{:.2}", frame.px(p.bv), frame.py(p.fom)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline class="hull" points="{}" fill="none" stroke="#d7191c" stroke-width="2"/>"##,
        coords.join(" ")
    );
    let _ = writeln!(out, r##"<g class="vertices" fill="#d7191c">"##);
    for p in hull.points() {
        let _ = writeln!(
            out,
            r#"<circle class="vertex" data-source="{}" cx="{:.2}" cy="{:.2}" r="4"/>"#,
            p.source_index,
            frame.px(p.bv),
            frame.py(p.fom)
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per record: its FOM, the best valid FOM so far, and for constrained runs
/// the best FOM so far among records meeting the target.
pub fn convergence_csv(ds: &Dataset) -> String {
    let cfg = ds.config();
    let target = match cfg.mode {
        RunMode::Constrained { bv_target } => Some(bv_target),
        _ => None,
    };
    let mut out = String::from("iteration,phase,valid,fom,incumbent_fom,incumbent_feasible_fom\n");
    let (mut best, mut best_feasible): (Option<f64>, Option<f64>) = (None, None);
    for r in ds.records() {
        if r.eval.valid {
            best = Some(best.map_or(r.eval.fom, |b| b.max(r.eval.fom)));
            if target.is_some_and(|t| cfg.feasibility.is_feasible(r.eval.bv, t)) {
                best_feasible = Some(best_feasible.map_or(r.eval.fom, |b| b.max(r.eval.fom)));
            }
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.phase.as_str(),
            r.eval.valid,
            float(r.eval.fom),
            best.map(float).unwrap_or_default(),
            best_feasible.map(float).unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#00429d");
        assert_eq!(ramp(1.0), "#d7191c");
        assert_eq!(ramp(-3.0), "#00429d");
    }
}
