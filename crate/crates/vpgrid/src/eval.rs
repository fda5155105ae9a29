//! Top-1/top-5 error tables, existence accuracy, and prediction overlays.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridSpec, RankedPrediction};
use crate::raster::ImageRaster;

/// One report row: exact hit counts plus the derived error fractions for a
/// `(method, grid)` pair. Counts are stored so fractions never accumulate
/// rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRow {
    pub method: String,
    pub grid_n: u32,
    pub sample_count: usize,
    pub top1_hits: usize,
    pub top5_hits: usize,
}

impl EvalRow {
    pub fn top1_error(&self) -> f64 {
        1.0 - self.top1_hits as f64 / self.sample_count as f64
    }

    pub fn top5_error(&self) -> f64 {
        1.0 - self.top5_hits as f64 / self.sample_count as f64
    }

    pub fn top1_accuracy(&self) -> f64 {
        self.top1_hits as f64 / self.sample_count as f64
    }
}

/// Collection of rows, optionally with an existence-accuracy entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub existence_accuracy: Option<f64>,
}

impl EvalReport {
    pub fn new() -> Self {
        EvalReport {
            rows: Vec::new(),
            existence_accuracy: None,
        }
    }
}

impl Default for EvalReport {
    fn default() -> Self {
        Self::new()
    }
}

/// Scores ranked predictions against true cells by exact hit counting.
pub fn evaluate(
    method: &str,
    predictions: &[RankedPrediction],
    truths: &[CellIndex],
    grid: GridSpec,
) -> Result<EvalRow> {
    if predictions.is_empty() || predictions.len() != truths.len() {
        return Err(Error::domain(format!(
            "prediction/truth length mismatch: {} vs {}",
            predictions.len(),
            truths.len()
        )));
    }
    let mut top1_hits = 0usize;
    let mut top5_hits = 0usize;
    for (pred, truth) in predictions.iter().zip(truths) {
        if pred.topk_hit(*truth, 1) {
            top1_hits += 1;
        }
        if pred.topk_hit(*truth, 5) {
            top5_hits += 1;
        }
    }
    Ok(EvalRow {
        method: method.to_string(),
        grid_n: grid.n(),
        sample_count: predictions.len(),
        top1_hits,
        top5_hits,
    })
}

/// Accuracy of thresholded existence probabilities; predict VP iff
/// `probability >= threshold`.
pub fn evaluate_existence(probabilities: &[f64], truths: &[bool], threshold: f64) -> Result<f64> {
    if probabilities.len() != truths.len() || probabilities.is_empty() {
        return Err(Error::domain("probability/truth length mismatch"));
    }
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::domain("threshold must be in (0,1)"));
    }
    let correct = probabilities
        .iter()
        .zip(truths)
        .filter(|(p, t)| (**p >= threshold) == **t)
        .count();
    Ok(correct as f64 / truths.len() as f64)
}

/// Marker sizing for prediction overlays; the top-1 marker is drawn larger
/// and brighter than the next four.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayStyle {
    pub top1_radius: f64,
    pub secondary_radius: f64,
    pub top1_intensity: f64,
    pub secondary_intensity: f64,
    pub stroke: f64,
}

impl OverlayStyle {
    /// Scales marker radii to the grid's cell size.
    pub fn for_grid(grid: GridSpec) -> Self {
        let cell = (grid.width() as f64 / grid.n() as f64)
            .min(grid.height() as f64 / grid.n() as f64);
        OverlayStyle {
            top1_radius: 0.45 * cell,
            secondary_radius: 0.25 * cell,
            top1_intensity: 1.0,
            secondary_intensity: 0.6,
            stroke: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.top1_radius <= self.secondary_radius {
            return Err(Error::domain("top-1 marker must be larger than the others"));
        }
        Ok(())
    }
}

/// Draws circles at the centers of the top-5 predicted cells. Pure function;
/// the input image is untouched and an empty prediction returns it unchanged.
pub fn render_overlay(
    img: &ImageRaster,
    pred: &RankedPrediction,
    style: &OverlayStyle,
) -> Result<ImageRaster> {
    style.validate()?;
    let mut out = img.clone();
    let grid = pred.grid();
    // secondary markers first so the top-1 circle draws over them
    let secondary: Vec<_> = pred.cells().take(5).skip(1).collect();
    for cell in secondary.into_iter().rev() {
        let center = grid.cell_to_center(cell)?;
        out.draw_circle(
            center,
            style.secondary_radius,
            style.stroke,
            style.secondary_intensity,
        );
    }
    if let Some(cell) = pred.cells().next() {
        let center = grid.cell_to_center(cell)?;
        out.draw_circle(center, style.top1_radius, style.stroke, style.top1_intensity);
    }
    Ok(out)
}

/// Serializes a report as the tab-separated table:
/// `method\tgrid_n\tN\ttop1_hits\ttop5_hits\ttop1_err\ttop5_err`,
/// errors with 4 decimal digits, then an `existence_accuracy` line when set.
pub fn report_to_tsv(report: &EvalReport) -> String {
    let mut out = String::from("method\tgrid_n\tN\ttop1_hits\ttop5_hits\ttop1_err\ttop5_err\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\n",
            r.method,
            r.grid_n,
            r.sample_count,
            r.top1_hits,
            r.top5_hits,
            r.top1_error(),
            r.top5_error()
        ));
    }
    if let Some(acc) = report.existence_accuracy {
        out.push_str(&format!("existence_accuracy\t{acc:.4}\n"));
    }
    out
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_tsv(report)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse("empty report", 0))?;
    if header != "method\tgrid_n\tN\ttop1_hits\ttop5_hits\ttop1_err\ttop5_err" {
        return Err(Error::parse("unrecognized report header", 0));
    }
    let mut report = EvalReport::new();
    let mut offset = header.len() + 1;
    for line in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["existence_accuracy", acc] => {
                report.existence_accuracy = Some(acc.parse().map_err(|_| {
                    Error::parse(format!("bad existence accuracy '{acc}'"), offset)
                })?);
            }
            [method, grid_n, n, top1, top5, _, _] => {
                let parse_usize = |s: &str| -> Result<usize> {
                    s.parse()
                        .map_err(|_| Error::parse(format!("bad count '{s}'"), offset))
                };
                report.rows.push(EvalRow {
                    method: (*method).to_string(),
                    grid_n: grid_n
                        .parse()
                        .map_err(|_| Error::parse(format!("bad grid '{grid_n}'"), offset))?,
                    sample_count: parse_usize(n)?,
                    top1_hits: parse_usize(top1)?,
                    top5_hits: parse_usize(top5)?,
                });
            }
            [] | [""] => {}
            _ => return Err(Error::parse(format!("unrecognized row '{line}'"), offset)),
        }
        offset += line.len() + 1;
    }
    Ok(report)
}

/// Formats a report as an aligned, human-readable text table.
pub fn format_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>6} {:>6} {:>10} {:>10} {:>9} {:>9}\n",
        "method", "grid_n", "N", "top1_hits", "top5_hits", "top1_err", "top5_err"
    ));
    for r in &report.rows {
        out.push_str(&format!(
            "{:<10} {:>6} {:>6} {:>10} {:>10} {:>9.4} {:>9.4}\n",
            r.method,
            r.grid_n,
            r.sample_count,
            r.top1_hits,
            r.top5_hits,
            r.top1_error(),
            r.top5_error()
        ));
    }
    if let Some(acc) = report.existence_accuracy {
        out.push_str(&format!("existence accuracy: {acc:.4}\n"));
    }
    out
}
