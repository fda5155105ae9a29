//! Non-learned detectors: Sobel edges, the Hough line transform with peak
//! extraction, intersection voting over the grid, and the center-prior
//! baselines.

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridSpec, PixelPoint, RankedPrediction};
use crate::raster::ImageRaster;

/// Binary edge mask plus the gradient magnitude it was thresholded from.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    mask: Vec<bool>,
    magnitude: Vec<f64>,
}

impl EdgeMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.mask[(y * self.width + x) as usize]
    }

    pub fn magnitude(&self, x: u32, y: u32) -> f64 {
        self.magnitude[(y * self.width + x) as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Edge pixels in row-major order.
    pub fn edge_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }
}

/// 3x3 Sobel gradients; the mask keeps pixels with magnitude >= threshold.
/// The one-pixel border is always excluded.
pub fn sobel_edges(img: &ImageRaster, threshold: f64) -> Result<EdgeMap> {
    if threshold < 0.0 {
        return Err(Error::domain("threshold must be >= 0"));
    }
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::domain("image smaller than 3x3"));
    }
    let mut mask = vec![false; (w * h) as usize];
    let mut magnitude = vec![0.0; (w * h) as usize];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: i32, dy: i32| {
                img.get((x as i32 + dx) as u32, (y as i32 + dy) as u32)
            };
            let gx = -p(-1, -1) + p(1, -1) - 2.0 * p(-1, 0) + 2.0 * p(1, 0) - p(-1, 1) + p(1, 1);
            let gy = -p(-1, -1) - 2.0 * p(0, -1) - p(1, -1) + p(-1, 1) + 2.0 * p(0, 1) + p(1, 1);
            let mag = (gx * gx + gy * gy).sqrt();
            let idx = (y * w + x) as usize;
            magnitude[idx] = mag;
            mask[idx] = mag >= threshold;
        }
    }
    Ok(EdgeMap {
        width: w,
        height: h,
        mask,
        magnitude,
    })
}

/// Vote array over line parameter space, `rho = x cos(theta) + y sin(theta)`.
#[derive(Debug, Clone)]
pub struct HoughAccumulator {
    theta_bins: usize,
    rho_bins: usize,
    rho_max: f64,
    rho_resolution: f64,
    votes: Vec<u32>,
}

impl HoughAccumulator {
    pub fn theta_bins(&self) -> usize {
        self.theta_bins
    }

    pub fn rho_bins(&self) -> usize {
        self.rho_bins
    }

    pub fn votes(&self, theta_bin: usize, rho_bin: usize) -> u32 {
        self.votes[theta_bin * self.rho_bins + rho_bin]
    }

    pub fn total_votes(&self) -> u64 {
        self.votes.iter().map(|v| u64::from(*v)).sum()
    }

    pub fn theta_of_bin(&self, theta_bin: usize) -> f64 {
        theta_bin as f64 * std::f64::consts::PI / self.theta_bins as f64
    }

    pub fn rho_of_bin(&self, rho_bin: usize) -> f64 {
        rho_bin as f64 * self.rho_resolution - self.rho_max
    }
}

/// Each masked pixel votes once per theta bin at the quantized rho.
/// `rho_max` is the ceiling of the image diagonal.
pub fn hough_transform(
    edges: &EdgeMap,
    theta_bins: usize,
    rho_resolution: f64,
) -> Result<HoughAccumulator> {
    if theta_bins == 0 {
        return Err(Error::domain("theta_bins must be >= 1"));
    }
    if rho_resolution <= 0.0 {
        return Err(Error::domain("rho_resolution must be > 0"));
    }
    let rho_max = (f64::from(edges.width()).hypot(f64::from(edges.height()))).ceil();
    let rho_bins = (2.0 * rho_max / rho_resolution).round() as usize + 1;
    let mut votes = vec![0u32; theta_bins * rho_bins];
    let trig: Vec<(f64, f64)> = (0..theta_bins)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / theta_bins as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    for (x, y) in edges.edge_pixels() {
        let (xf, yf) = (f64::from(x), f64::from(y));
        for (k, (c, s)) in trig.iter().enumerate() {
            let rho = xf * c + yf * s;
            let bin = ((rho + rho_max) / rho_resolution).round() as usize;
            votes[k * rho_bins + bin.min(rho_bins - 1)] += 1;
        }
    }
    Ok(HoughAccumulator {
        theta_bins,
        rho_bins,
        rho_max,
        rho_resolution,
        votes,
    })
}

/// A detected line in normal form with its accumulator vote count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughLine {
    pub theta: f64,
    pub rho: f64,
    pub votes: u32,
}

/// Greedy peak extraction with non-maximum suppression. Each selected peak
/// zeroes a `(2r+1)^2` neighborhood; theta wraps with the matching rho sign
/// flip. Output sorted by votes descending, ties by (theta_bin, rho_bin).
pub fn extract_peaks(
    acc: &HoughAccumulator,
    max_lines: usize,
    min_votes: u32,
    nms_radius: usize,
) -> Result<Vec<HoughLine>> {
    if max_lines == 0 {
        return Err(Error::domain("max_lines must be >= 1"));
    }
    let mut votes = acc.votes.clone();
    let mut out = Vec::new();
    let floor = min_votes.max(1);
    let flip_base = (2.0 * acc.rho_max / acc.rho_resolution).round() as i64;
    while out.len() < max_lines {
        // first-index argmax makes tie-breaking (theta_bin, rho_bin)-ascending
        let (mut best_idx, mut best) = (0usize, 0u32);
        for (i, v) in votes.iter().enumerate() {
            if *v > best {
                best = *v;
                best_idx = i;
            }
        }
        if best < floor {
            break;
        }
        let t = best_idx / acc.rho_bins;
        let r = best_idx % acc.rho_bins;
        out.push(HoughLine {
            theta: acc.theta_of_bin(t),
            rho: acc.rho_of_bin(r),
            votes: best,
        });
        let radius = nms_radius as i64;
        for dt in -radius..=radius {
            for dr in -radius..=radius {
                let mut tn = t as i64 + dt;
                let mut rn = r as i64 + dr;
                if tn < 0 || tn >= acc.theta_bins as i64 {
                    // theta wraps by pi; the same line reappears with -rho
                    tn = tn.rem_euclid(acc.theta_bins as i64);
                    rn = flip_base - rn;
                }
                if rn < 0 || rn >= acc.rho_bins as i64 {
                    continue;
                }
                votes[tn as usize * acc.rho_bins + rn as usize] = 0;
            }
        }
    }
    Ok(out)
}

/// Intersection of two lines in normal form. `None` when near-parallel
/// (`|sin(theta_a - theta_b)| < 1e-6`).
pub fn intersect(a: &HoughLine, b: &HoughLine) -> Option<PixelPoint> {
    let det = (b.theta - a.theta).sin();
    if det.abs() < 1e-6 {
        return None;
    }
    let x = (a.rho * b.theta.sin() - b.rho * a.theta.sin()) / det;
    let y = (b.rho * a.theta.cos() - a.rho * b.theta.cos()) / det;
    Some(PixelPoint::new(x, y))
}

/// Pairwise line-intersection voting over the grid. Every unordered pair
/// whose intersection lands in-frame adds `min(votes_a, votes_b)` to that
/// cell; with no in-frame intersection at all, the image-center cell is the
/// sole prediction.
pub fn vote_vp(lines: &[HoughLine], grid: GridSpec, top_k: usize) -> Result<RankedPrediction> {
    if top_k == 0 {
        return Err(Error::domain("top_k must be >= 1"));
    }
    let p = grid.class_count() as usize;
    let mut weights = vec![0.0f64; p];
    let (w, h) = (f64::from(grid.width()), f64::from(grid.height()));
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            if let Some(pt) = intersect(&lines[i], &lines[j]) {
                if pt.x >= 0.0 && pt.x < w && pt.y >= 0.0 && pt.y < h {
                    let cell = grid.pixel_to_cell(pt)?;
                    weights[grid.linearize(cell)? as usize] +=
                        f64::from(lines[i].votes.min(lines[j].votes));
                }
            }
        }
    }
    let scored: Vec<(CellIndex, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| (grid.delinearize(i as u32).unwrap(), *w))
        .collect();
    if scored.is_empty() {
        let center = grid.pixel_to_cell(grid.center())?;
        return RankedPrediction::from_scores(grid, vec![(center, 1.0)]);
    }
    Ok(RankedPrediction::from_scores(grid, scored)?.truncated(top_k))
}

/// Parameters of the full Hough detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    pub edge_threshold: f64,
    pub theta_bins: usize,
    pub rho_resolution: f64,
    pub max_lines: usize,
    /// Vote floor as a fraction of the longest expected segment,
    /// `max(width, height)`.
    pub min_votes_fraction: f64,
    pub nms_radius: usize,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams {
            edge_threshold: 2.0,
            theta_bins: 180,
            rho_resolution: 1.0,
            max_lines: 12,
            min_votes_fraction: 0.3,
            nms_radius: 2,
        }
    }
}

/// Full classical chain: Sobel -> Hough -> peaks -> pairwise voting.
pub fn hough_detect(
    img: &ImageRaster,
    grid: GridSpec,
    params: &HoughParams,
    top_k: usize,
) -> Result<RankedPrediction> {
    let edges = sobel_edges(img, params.edge_threshold)?;
    let acc = hough_transform(&edges, params.theta_bins, params.rho_resolution)?;
    let min_votes = (params.min_votes_fraction * f64::from(grid.width().max(grid.height())))
        .round() as u32;
    let lines = extract_peaks(&acc, params.max_lines, min_votes, params.nms_radius)?;
    let lines: Vec<HoughLine> = lines
        .iter()
        .map(|l| {
            let mut l = refine_rho(&acc, l, 2);
            // hough_transform votes with integer pixel indices; the pixel at
            // (x, y) covers the point (x + 0.5, y + 0.5), so map the line
            // into center coordinates before intersecting.
            l.rho += 0.5 * (l.theta.cos() + l.theta.sin());
            l
        })
        .collect();
    vote_vp(&lines, grid, top_k)
}

/// Sub-bin rho estimate: the vote-weighted centroid over `radius` rho bins on
/// each side of the peak at the peak's theta.
fn refine_rho(acc: &HoughAccumulator, line: &HoughLine, radius: i64) -> HoughLine {
    let step = std::f64::consts::PI / acc.theta_bins as f64;
    let t = ((line.theta / step).round() as usize) % acc.theta_bins;
    let r = ((line.rho + acc.rho_max) / acc.rho_resolution).round() as i64;
    let (mut num, mut den) = (0.0, 0.0);
    for dr in -radius..=radius {
        let rn = r + dr;
        if rn < 0 || rn >= acc.rho_bins as i64 {
            continue;
        }
        let v = f64::from(acc.votes(t, rn as usize));
        num += v * (rn as f64 * acc.rho_resolution - acc.rho_max);
        den += v;
    }
    HoughLine {
        theta: line.theta,
        rho: if den > 0.0 { num / den } else { line.rho },
        votes: line.votes,
    }
}

/// top1 | top5 center-prior baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Top1,
    Top5,
}

/// Center-prior baseline from training labels: the most frequent grid cell,
/// and for top-5 its left, up, right, down neighbors in that order, dropping
/// neighbors that fall off the grid.
pub fn center_baseline(
    train_labels: &[CellIndex],
    grid: GridSpec,
    mode: BaselineMode,
) -> Result<RankedPrediction> {
    if train_labels.is_empty() {
        return Err(Error::domain("center baseline needs at least one label"));
    }
    let p = grid.class_count() as usize;
    let mut counts = vec![0u64; p];
    for label in train_labels {
        counts[grid.linearize(*label)? as usize] += 1;
    }
    // argmax, ties toward the smaller linear index
    let mode_idx = counts
        .iter()
        .enumerate()
        .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
        .map(|(i, _)| i as u32)
        .unwrap();
    let mode_cell = grid.delinearize(mode_idx)?;
    match mode {
        BaselineMode::Top1 => {
            RankedPrediction::from_scores(grid, vec![(mode_cell, counts[mode_idx as usize] as f64)])
        }
        BaselineMode::Top5 => {
            let (row, col) = (mode_cell.row as i64, mode_cell.col as i64);
            // [x y], [x-1 y], [x y-1], [x+1 y], [x y+1] with x = col, y = row
            let neighbors = [
                (row, col),
                (row, col - 1),
                (row - 1, col),
                (row, col + 1),
                (row + 1, col),
            ];
            let n = i64::from(grid.n());
            let mut scored = Vec::new();
            let mut score = 5.0;
            for (r, c) in neighbors {
                if (0..n).contains(&r) && (0..n).contains(&c) {
                    scored.push((CellIndex::new(r as u32, c as u32), score));
                }
                score -= 1.0;
            }
            RankedPrediction::from_scores(grid, scored)
        }
    }
}
