//! Dense probability grids and the numerics of the histogram Bayes filter.
//!
//! Grids are stored row-major. Cell `(row, col)` is centered at pixel
//! `(col * cell_size, row * cell_size)`, matching an embedding map sampled
//! with a stride of `cell_size` pixels.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Tolerance used when checking that a grid sums to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Width, height and pixel pitch shared by every map of a scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        let g = Self {
            width,
            height,
            cell_size,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid("width and height must be positive"));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidGrid("cell size must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_of_index(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    /// Pixel position `[x, y]` of a cell center.
    #[inline]
    pub fn cell_center(&self, cell: Cell) -> [f64; 2] {
        [
            cell.col as f64 * self.cell_size,
            cell.row as f64 * self.cell_size,
        ]
    }

    /// Cell whose center is nearest to the pixel position, if inside the grid.
    pub fn cell_at(&self, px: [f64; 2]) -> Option<Cell> {
        let col = math::round(px[0] / self.cell_size);
        let row = math::round(px[1] / self.cell_size);
        if !(col.is_finite() && row.is_finite()) || col < 0.0 || row < 0.0 {
            return None;
        }
        let (col, row) = (col as usize, row as usize);
        (col < self.width && row < self.height).then_some(Cell::new(row, col))
    }

    /// Largest pixel coordinates still mapped to a cell center: `[(W-1)s, (H-1)s]`.
    pub fn extent(&self) -> [f64; 2] {
        [
            (self.width - 1) as f64 * self.cell_size,
            (self.height - 1) as f64 * self.cell_size,
        ]
    }

    /// True if `px` lies in the rectangle spanned by the cell centers.
    pub fn contains(&self, px: [f64; 2]) -> bool {
        let [ex, ey] = self.extent();
        px[0] >= 0.0 && px[1] >= 0.0 && px[0] <= ex && px[1] <= ey
    }
}

/// A non-negative W×H table of cell values: beliefs and likelihood maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::InvalidGrid(
                "value count does not match width*height",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidGrid("values must be finite and non-negative"));
        }
        Ok(Self { geometry, values })
    }

    /// Grid from nested rows, convenient in tests and examples.
    pub fn from_rows(rows: &[&[f64]], cell_size: f64) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidGrid("ragged rows"));
        }
        let geometry = GridGeometry::new(width, height, cell_size)?;
        Self::new(
            geometry,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            values: vec![0.0; geometry.len()],
        }
    }

    pub fn uniform(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            values: vec![1.0 / n as f64; n],
        }
    }

    pub fn delta(geometry: GridGeometry, cell: Cell) -> Self {
        let mut g = Self::zeros(geometry);
        let idx = geometry.index(cell);
        g.values[idx] = 1.0;
        g
    }

    /// Builds a grid by evaluating `f` at every cell. Negative or non-finite
    /// results are rejected.
    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(Cell) -> f64) -> Result<Self> {
        let values = (0..geometry.len())
            .map(|i| f(geometry.cell_of_index(i)))
            .collect();
        Self::new(geometry, values)
    }

    #[inline]
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.geometry.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.geometry.height
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.geometry.cell_size
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.values[self.geometry.index(cell)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    /// Rescales the grid to unit mass, keeping ratios between cells.
    pub fn normalized(&self) -> Result<Self> {
        let mut values = self.values.clone();
        normalize_in_place(&mut values)?;
        Ok(Self {
            geometry: self.geometry,
            values,
        })
    }

    /// Predict step: scatters every cell's mass through the kernel, drops
    /// what leaves the grid and renormalizes.
    pub fn convolve(&self, kernel: &GaussianKernel) -> Result<Self> {
        let (w, h) = (self.width() as isize, self.height() as isize);
        let r = kernel.radius as isize;
        let side = kernel.side();
        let mut out = vec![0.0; self.values.len()];
        for row in 0..h {
            let dr_lo = (-r).max(-row);
            let dr_hi = r.min(h - 1 - row);
            for col in 0..w {
                let p = self.values[(row * w + col) as usize];
                if p == 0.0 {
                    continue;
                }
                let dc_lo = (-r).max(-col);
                let dc_hi = r.min(w - 1 - col);
                for dr in dr_lo..=dr_hi {
                    let krow = ((dr + r) as usize) * side;
                    let orow = ((row + dr) * w) as usize;
                    for dc in dc_lo..=dc_hi {
                        out[orow + (col + dc) as usize] +=
                            p * kernel.weights[krow + (dc + r) as usize];
                    }
                }
            }
        }
        normalize_in_place(&mut out)?;
        Ok(Self {
            geometry: self.geometry,
            values: out,
        })
    }

    /// Update step: element-wise product with a likelihood, renormalized.
    /// A constant positive likelihood leaves the prior untouched.
    pub fn multiply_update(&self, likelihood: &ProbabilityGrid) -> Result<Self> {
        self.check_same_shape(likelihood)?;
        let first = likelihood.values[0];
        if first > 0.0 && likelihood.values.iter().all(|&l| l == first) {
            return Ok(self.clone());
        }
        let mut values: Vec<f64> = self
            .values
            .iter()
            .zip(&likelihood.values)
            .map(|(p, l)| p * l)
            .collect();
        normalize_in_place(&mut values)?;
        Ok(Self {
            geometry: self.geometry,
            values,
        })
    }

    /// Arg-max cell and its value; ties resolve to the first cell in row-major order.
    pub fn map_peak(&self) -> (Cell, f64) {
        let mut best = 0;
        let mut best_val = self.values[0];
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        (self.geometry.cell_of_index(best), best_val)
    }

    /// Expected pixel position `[x, y]` under the grid.
    pub fn expectation(&self) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for (i, &p) in self.values.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let c = self.geometry.cell_center(self.geometry.cell_of_index(i));
            acc[0] += p * c[0];
            acc[1] += p * c[1];
        }
        acc
    }

    /// Pixel-space covariance of the grid about its expectation.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let m = self.expectation();
        let mut cov = [[0.0; 2]; 2];
        for (i, &p) in self.values.iter().enumerate() {
            let c = self.geometry.cell_center(self.geometry.cell_of_index(i));
            let (dx, dy) = (c[0] - m[0], c[1] - m[1]);
            cov[0][0] += p * dx * dx;
            cov[0][1] += p * dx * dy;
            cov[1][1] += p * dy * dy;
        }
        cov[1][0] = cov[0][1];
        cov
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * math::ln(p))
            .sum::<f64>()
    }

    /// Upper bound of [`entropy`](Self::entropy): `ln(W*H)`.
    pub fn max_entropy(&self) -> f64 {
        math::ln(self.values.len() as f64)
    }

    fn check_same_shape(&self, other: &ProbabilityGrid) -> Result<()> {
        if self.width() != other.width() || self.height() != other.height() {
            return Err(Error::ShapeMismatch {
                expected: (self.width(), self.height()),
                found: (other.width(), other.height()),
            });
        }
        Ok(())
    }
}

fn normalize_in_place(values: &mut [f64]) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::ZeroMass);
    }
    let inv = 1.0 / sum;
    values.iter_mut().for_each(|v| *v *= inv);
    Ok(())
}

/// Discretized bivariate Gaussian used as the motion kernel of the predict step.
///
/// `mean` and `covariance` are in cells (per frame), `[x, y]` order. The
/// support is a `(2R+1)x(2R+1)` window of offsets, row-major with the row
/// offset (y) outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    /// Smallest radius covering three standard deviations plus the mean shift.
    pub fn required_radius(mean: [f64; 2], covariance: &[[f64; 2]; 2]) -> usize {
        let sigma = math::sqrt(math::max_eigenvalue_2x2(covariance).max(0.0));
        let shift = mean[0].abs().max(mean[1].abs());
        math::ceil(3.0 * sigma + shift) as usize
    }

    pub fn new(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self> {
        if !math::is_spd_2x2(&covariance) {
            return Err(Error::NonPositiveDefinite);
        }
        let radius = Self::required_radius(mean, &covariance);
        Self::build(mean, covariance, radius)
    }

    pub fn with_radius(mean: [f64; 2], covariance: [[f64; 2]; 2], radius: usize) -> Result<Self> {
        if !math::is_spd_2x2(&covariance) {
            return Err(Error::NonPositiveDefinite);
        }
        let required = Self::required_radius(mean, &covariance);
        if radius < required {
            return Err(Error::RadiusTooSmall { radius, required });
        }
        Self::build(mean, covariance, radius)
    }

    fn build(mean: [f64; 2], covariance: [[f64; 2]; 2], radius: usize) -> Result<Self> {
        if !(mean[0].is_finite() && mean[1].is_finite()) {
            return Err(Error::InvalidGrid("kernel mean must be finite"));
        }
        let [[a, b], [_, d]] = covariance;
        let det = a * d - b * b;
        let (ia, ib, id) = (d / det, -b / det, a / det);
        let r = radius as isize;
        let side = 2 * radius + 1;
        let mut log_w = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                let x = dx as f64 - mean[0];
                let y = dy as f64 - mean[1];
                log_w.push(-0.5 * (ia * x * x + 2.0 * ib * x * y + id * y * y));
            }
        }
        // Shift by the max so very narrow kernels still keep their nearest cell.
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_w.iter().map(|l| math::exp(l - max)).collect();
        normalize_in_place(&mut weights)?;
        Ok(Self {
            mean,
            covariance,
            radius,
            weights,
        })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at row offset `dr` (y) and column offset `dc` (x); zero outside the support.
    pub fn weight(&self, dr: isize, dc: isize) -> f64 {
        let r = self.radius as isize;
        if dr.abs() > r || dc.abs() > r {
            return 0.0;
        }
        self.weights[((dr + r) as usize) * self.side() + (dc + r) as usize]
    }
}
