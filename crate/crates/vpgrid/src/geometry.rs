//! Grid model shared by every detector and the evaluator.
//!
//! The image is partitioned into an `n x n` grid of cells and vanishing
//! point localization is classification over the `p = n*n` cells.
//! Coordinate convention: `x` runs along columns, `y` along rows, origin at
//! the top-left of the image.

use crate::error::{Error, Result};

/// Image dimensions plus the grid side `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    width: u32,
    height: u32,
    n: u32,
}

impl GridSpec {
    pub fn new(width: u32, height: u32, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("grid side n must be >= 1"));
        }
        if width < n || height < n {
            return Err(Error::domain(format!(
                "image {width}x{height} too small for {n}x{n} grid"
            )));
        }
        Ok(GridSpec { width, height, n })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of grid cells, `p = n*n`.
    pub fn class_count(&self) -> u32 {
        self.n * self.n
    }

    /// Probability of hitting the true cell with one uniform guess, `1/p`.
    pub fn chance_level(&self) -> f64 {
        1.0 / self.class_count() as f64
    }

    /// Center of the image as a pixel point.
    pub fn center(&self) -> PixelPoint {
        PixelPoint {
            x: self.width as f64 / 2.0,
            y: self.height as f64 / 2.0,
        }
    }

    /// Cell containing the pixel. Quantization is `floor(coord * n / extent)`
    /// evaluated on the exact ratio, clamped to the last cell so labels that
    /// land on the far boundary after float noise stay in range.
    pub fn pixel_to_cell(&self, point: PixelPoint) -> Result<CellIndex> {
        if !point.x.is_finite() || !point.y.is_finite() {
            return Err(Error::domain("non-finite pixel coordinate"));
        }
        if point.x < 0.0
            || point.y < 0.0
            || point.x >= self.width as f64
            || point.y >= self.height as f64
        {
            return Err(Error::domain(format!(
                "pixel ({}, {}) outside {}x{} image",
                point.x, point.y, self.width, self.height
            )));
        }
        let n = self.n as f64;
        let col = ((point.x * n / self.width as f64).floor() as u32).min(self.n - 1);
        let row = ((point.y * n / self.height as f64).floor() as u32).min(self.n - 1);
        Ok(CellIndex { row, col })
    }

    /// Pixel at the center of a cell.
    pub fn cell_to_center(&self, cell: CellIndex) -> Result<PixelPoint> {
        self.check_cell(cell)?;
        Ok(PixelPoint {
            x: (cell.col as f64 + 0.5) * self.width as f64 / self.n as f64,
            y: (cell.row as f64 + 0.5) * self.height as f64 / self.n as f64,
        })
    }

    /// Row-major class index of a cell, in `[0, p)`.
    pub fn linearize(&self, cell: CellIndex) -> Result<u32> {
        self.check_cell(cell)?;
        Ok(cell.row * self.n + cell.col)
    }

    /// Inverse of [`linearize`](Self::linearize).
    pub fn delinearize(&self, index: u32) -> Result<CellIndex> {
        if index >= self.class_count() {
            return Err(Error::domain(format!(
                "class index {index} out of range for p = {}",
                self.class_count()
            )));
        }
        Ok(CellIndex {
            row: index / self.n,
            col: index % self.n,
        })
    }

    fn check_cell(&self, cell: CellIndex) -> Result<()> {
        if cell.row >= self.n || cell.col >= self.n {
            return Err(Error::domain(format!(
                "cell ({}, {}) invalid for {}x{} grid",
                cell.row, cell.col, self.n, self.n
            )));
        }
        Ok(())
    }
}

/// A pixel position; `x` is the column direction, `y` the row direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }
}

/// A grid cell, `(row, col)` with both in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub row: u32,
    pub col: u32,
}

impl CellIndex {
    pub fn new(row: u32, col: u32) -> Self {
        CellIndex { row, col }
    }
}

/// Score-ordered list of candidate cells emitted by every detector.
///
/// Entries are sorted by score descending; ties break toward the smaller
/// linear index so the order is total and deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    grid: GridSpec,
    entries: Vec<(CellIndex, f64)>,
}

impl RankedPrediction {
    /// Builds a ranked prediction from unordered `(cell, score)` pairs.
    /// Duplicate cells or cells outside the grid are rejected.
    pub fn from_scores(grid: GridSpec, mut scores: Vec<(CellIndex, f64)>) -> Result<Self> {
        let mut seen = vec![false; grid.class_count() as usize];
        for (cell, score) in &scores {
            let idx = grid.linearize(*cell)? as usize;
            if seen[idx] {
                return Err(Error::domain(format!(
                    "duplicate cell ({}, {}) in prediction",
                    cell.row, cell.col
                )));
            }
            if !score.is_finite() {
                return Err(Error::domain("non-finite prediction score"));
            }
            seen[idx] = true;
        }
        scores.sort_by(|(ca, sa), (cb, sb)| {
            sb.partial_cmp(sa)
                .unwrap()
                .then_with(|| (ca.row * grid.n() + ca.col).cmp(&(cb.row * grid.n() + cb.col)))
        });
        Ok(RankedPrediction {
            grid,
            entries: scores,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn entries(&self) -> &[(CellIndex, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cells in rank order, best first.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.entries.iter().map(|(c, _)| *c)
    }

    /// Copy keeping only the first `k` ranked cells.
    pub fn truncated(&self, k: usize) -> RankedPrediction {
        RankedPrediction {
            grid: self.grid,
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    /// True iff `truth` appears among the first `min(k, len)` ranked cells.
    /// An empty prediction misses.
    pub fn topk_hit(&self, truth: CellIndex, k: usize) -> bool {
        self.entries
            .iter()
            .take(k)
            .any(|(cell, _)| *cell == truth)
    }
}
