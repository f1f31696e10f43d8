//! Precision-recall curve output as CSV and SVG.
//!
//! A curve is the sampled PR points of one detection run; several
//! curves can share one plot (e.g. fused vs unfused). The SVG is
//! self-contained markup on [0, 1]^2 axes with one polyline and one
//! point marker per sample per curve.

use std::io::Write;

use thiserror::Error;

use crate::metrics::PrPoint;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("nothing to plot: no curves or empty curve")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<PrPoint>,
}

fn check(curves: &[Curve]) -> Result<(), PlotError> {
    if curves.is_empty() || curves.iter().any(|c| c.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    Ok(())
}

/// One row per sampled point, full float precision.
pub fn write_pr_csv<W: Write>(curves: &[Curve], mut out: W) -> Result<(), PlotError> {
    check(curves)?;
    writeln!(out, "curve,threshold,precision,recall")?;
    for curve in curves {
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{}",
                curve.label, p.threshold, p.precision, p.recall
            )?;
        }
    }
    Ok(())
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PLOT: f64 = SIZE - 2.0 * MARGIN;
const PALETTE: [&str; 4] = ["#1f6fb2", "#d1495b", "#3a8c5f", "#8a5fbf"];

fn sx(recall: f64) -> f64 {
    MARGIN + recall * PLOT
}

fn sy(precision: f64) -> f64 {
    MARGIN + (1.0 - precision) * PLOT
}

/// Recall on x, precision on y, both axes [0, 1]. Each curve gets a
/// polyline plus a circle marker per sampled threshold and a legend
/// entry.
pub fn write_pr_svg<W: Write>(curves: &[Curve], mut out: W) -> Result<(), PlotError> {
    check(curves)?;
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">"
    )?;
    writeln!(
        out,
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{PLOT}\" height=\"{PLOT}\" \
         fill=\"none\" stroke=\"#444444\"/>"
    )?;
    // quarter grid lines and tick labels
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let (x, y) = (sx(v), sy(v));
        if i > 0 && i < 4 {
            writeln!(
                out,
                "  <line x1=\"{x:.2}\" y1=\"{MARGIN}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#dddddd\"/>",
                MARGIN + PLOT
            )?;
            writeln!(
                out,
                "  <line x1=\"{MARGIN}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#dddddd\"/>",
                MARGIN + PLOT
            )?;
        }
        writeln!(
            out,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>",
            MARGIN + PLOT + 16.0
        )?;
        writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{y:.2}\" font-size=\"11\" text-anchor=\"end\">{v}</text>",
            MARGIN - 6.0
        )?;
    }
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">recall</text>",
        MARGIN + PLOT / 2.0,
        SIZE - 8.0
    )?;
    writeln!(
        out,
        "  <text x=\"14\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.2})\">precision</text>",
        MARGIN + PLOT / 2.0,
        MARGIN + PLOT / 2.0
    )?;

    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.3},{:.3}", sx(p.recall), sy(p.precision)))
            .collect();
        writeln!(
            out,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        )?;
        for p in &curve.points {
            writeln!(
                out,
                "  <circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{color}\"/>",
                sx(p.recall),
                sy(p.precision)
            )?;
        }
        let ly = MARGIN + 16.0 + 16.0 * ci as f64;
        writeln!(
            out,
            "  <line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            MARGIN + PLOT - 110.0,
            MARGIN + PLOT - 90.0
        )?;
        writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>",
            MARGIN + PLOT - 84.0,
            ly + 4.0,
            curve.label
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
