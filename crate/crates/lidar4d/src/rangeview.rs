//! Spherical range-image projection, its inverse, and BEV rasterization.
//!
//! A range image is a rows×cols grid indexed by beam elevation (row, top
//! row = highest beam) and azimuth (column). Each cell stores the range of
//! the closest return mapped into it, or a no-return sentinel.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Range ties closer than this keep the earlier point (deterministic z-buffer).
pub const ZBUFFER_TIE_EPS: f64 = 1e-6;

/// Spinning-sensor geometry: beam count, azimuth bins, elevation span and
/// range gate. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub rows: usize,
    pub cols: usize,
    pub elev_max: f64,
    pub elev_min: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// Optional per-row beam elevations (top to bottom); overrides the
    /// uniform binning when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_elevations: Option<Vec<f64>>,
}

impl SensorSpec {
    /// 32-beam spinning sensor, 1024 azimuth bins, elevation span
    /// [−30.67°, +10.67°], range gate [0.5 m, 120 m].
    pub fn default_32beam() -> Self {
        Self {
            rows: 32,
            cols: 1024,
            elev_max: 10.67f64.to_radians(),
            elev_min: -30.67f64.to_radians(),
            range_min: 0.5,
            range_max: 120.0,
            row_elevations: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 2 {
            return Err(Error::InvalidValue(format!(
                "sensor spec needs rows >= 1 and cols >= 2, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.elev_max > self.elev_min) {
            return Err(Error::InvalidValue("elev_max must exceed elev_min".into()));
        }
        if !(0.0 < self.range_min && self.range_min < self.range_max) {
            return Err(Error::InvalidValue(
                "need 0 < range_min < range_max".into(),
            ));
        }
        if let Some(table) = &self.row_elevations {
            if table.len() != self.rows {
                return Err(Error::InvalidValue(format!(
                    "row elevation table length {} != rows {}",
                    table.len(),
                    self.rows
                )));
            }
        }
        Ok(())
    }

    /// Row for an elevation angle, or `None` outside the beam span.
    pub fn row_of(&self, elev: f64) -> Option<usize> {
        if let Some(table) = &self.row_elevations {
            // nearest beam, half-bin tolerance at the extremes
            let span = self.elev_max - self.elev_min;
            let slack = span / (2.0 * self.rows as f64);
            if elev > self.elev_max + slack || elev < self.elev_min - slack {
                return None;
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, &e) in table.iter().enumerate() {
                let d = (elev - e).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            Some(best)
        } else {
            if elev > self.elev_max || elev < self.elev_min {
                return None;
            }
            let span = self.elev_max - self.elev_min;
            let r = ((self.elev_max - elev) / span * self.rows as f64).floor() as usize;
            Some(r.min(self.rows - 1))
        }
    }

    /// Column by azimuth: col = floor(((1 − az/π)/2)·cols) mod cols.
    pub fn col_of(&self, azimuth: f64) -> usize {
        let c = ((1.0 - azimuth / std::f64::consts::PI) / 2.0 * self.cols as f64).floor() as i64;
        c.rem_euclid(self.cols as i64) as usize
    }

    /// Central elevation of a row.
    pub fn row_elevation(&self, row: usize) -> f64 {
        if let Some(table) = &self.row_elevations {
            table[row]
        } else {
            let span = self.elev_max - self.elev_min;
            self.elev_max - (row as f64 + 0.5) / self.rows as f64 * span
        }
    }

    /// Central azimuth of a column.
    pub fn col_azimuth(&self, col: usize) -> f64 {
        std::f64::consts::PI * (1.0 - 2.0 * (col as f64 + 0.5) / self.cols as f64)
    }

    /// Unit direction of a cell's central ray.
    pub fn ray_direction(&self, row: usize, col: usize) -> Vector3<f64> {
        let e = self.row_elevation(row);
        let a = self.col_azimuth(col);
        Vector3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
    }

    /// Cell for a point in the sensor frame, or `None` when the point is
    /// outside the elevation span or the range gate. Matches `project`.
    pub fn pixel_of(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let r = p.norm();
        if !(self.range_min..=self.range_max).contains(&r) {
            return None;
        }
        let elev = (p.z / r).asin();
        let row = self.row_of(elev)?;
        let col = self.col_of(p.y.atan2(p.x));
        Some((row, col))
    }
}

/// Grid of per-cell ranges and intensities with the producing sensor spec.
///
/// No-return is `f64::INFINITY` in memory (serialized as 0 in dumps).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    pub spec: SensorSpec,
    pub range: Vec<f64>,
    pub intensity: Vec<f64>,
}

pub const NO_RETURN: f64 = f64::INFINITY;

impl RangeImage {
    pub fn empty(spec: SensorSpec) -> Self {
        let n = spec.rows * spec.cols;
        Self {
            spec,
            range: vec![NO_RETURN; n],
            intensity: vec![0.0; n],
        }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.spec.cols + col
    }

    pub fn range_at(&self, row: usize, col: usize) -> f64 {
        self.range[self.idx(row, col)]
    }

    pub fn is_return(&self, row: usize, col: usize) -> bool {
        self.range[self.idx(row, col)].is_finite()
    }

    pub fn finite_count(&self) -> usize {
        self.range.iter().filter(|r| r.is_finite()).count()
    }

    /// Cell-exact comparison: identical spec, identical return pattern and
    /// intensities, ranges within `tol` (rebuilding a point from a cell's
    /// central ray can move its recomputed norm by an ulp).
    pub fn approx_eq(&self, other: &RangeImage, tol: f64) -> bool {
        if self.spec != other.spec || self.intensity != other.intensity {
            return false;
        }
        self.range.iter().zip(&other.range).all(|(a, b)| {
            match (a.is_finite(), b.is_finite()) {
                (true, true) => (a - b).abs() <= tol,
                (false, false) => true,
                _ => false,
            }
        })
    }
}

/// Result of an indexed projection: the image plus, per cell, the index of
/// the winning input point.
pub struct IndexedProjection {
    pub image: RangeImage,
    pub winner: Vec<Option<usize>>,
}

/// Projects a cloud into a range image, keeping per cell the point with the
/// minimum range (first point wins ties closer than [`ZBUFFER_TIE_EPS`]).
pub fn project(cloud: &PointCloud, spec: &SensorSpec) -> RangeImage {
    project_indexed(cloud, spec).image
}

/// As [`project`], but also reports which input point won each cell.
pub fn project_indexed(cloud: &PointCloud, spec: &SensorSpec) -> IndexedProjection {
    let mut image = RangeImage::empty(spec.clone());
    let mut winner: Vec<Option<usize>> = vec![None; spec.rows * spec.cols];
    for (i, p) in cloud.points.iter().enumerate() {
        let Some((row, col)) = spec.pixel_of(p) else {
            continue;
        };
        let r = p.norm();
        let idx = image.idx(row, col);
        if r < image.range[idx] - ZBUFFER_TIE_EPS {
            image.range[idx] = r;
            image.intensity[idx] = cloud.intensity[i];
            winner[idx] = Some(i);
        }
    }
    IndexedProjection { image, winner }
}

/// One point per finite cell, on the cell's central ray at the stored range.
pub fn unproject(img: &RangeImage) -> PointCloud {
    let mut points = Vec::new();
    let mut intensity = Vec::new();
    for row in 0..img.spec.rows {
        for col in 0..img.spec.cols {
            let r = img.range_at(row, col);
            if r.is_finite() {
                points.push(img.spec.ray_direction(row, col) * r);
                intensity.push(img.intensity[img.idx(row, col)]);
            }
        }
    }
    PointCloud {
        points,
        intensity,
        object_id: None,
    }
}

/// BEV grid parameters: extent in meters and bin counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub bins_x: usize,
    pub bins_y: usize,
}

impl Default for BevGrid {
    /// x, y ∈ [−50 m, 50 m], 500×500 bins.
    fn default() -> Self {
        Self {
            x_min: -50.0,
            x_max: 50.0,
            y_min: -50.0,
            y_max: 50.0,
            bins_x: 500,
            bins_y: 500,
        }
    }
}

impl BevGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::InvalidValue("BEV extent must be non-empty".into()));
        }
        if self.bins_x == 0 || self.bins_y == 0 {
            return Err(Error::InvalidValue("BEV bin counts must be positive".into()));
        }
        Ok(())
    }

    fn bin_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(self.x_min..self.x_max).contains(&x) || !(self.y_min..self.y_max).contains(&y) {
            return None;
        }
        let bx = ((x - self.x_min) / (self.x_max - self.x_min) * self.bins_x as f64) as usize;
        let by = ((y - self.y_min) / (self.y_max - self.y_min) * self.bins_y as f64) as usize;
        Some((bx.min(self.bins_x - 1), by.min(self.bins_y - 1)))
    }
}

/// Top-down occupancy counts; z is ignored, out-of-bounds points dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct BevHistogram {
    pub grid: BevGrid,
    pub counts: Vec<u64>,
}

impl BevHistogram {
    pub fn zero(grid: BevGrid) -> Self {
        let n = grid.bins_x * grid.bins_y;
        Self {
            grid,
            counts: vec![0; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count_at(&self, bx: usize, by: usize) -> u64 {
        self.counts[bx * self.grid.bins_y + by]
    }

    /// Adds another histogram over the same grid.
    pub fn merge(&mut self, other: &BevHistogram) {
        assert_eq!(self.grid, other.grid, "BEV grids must match");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Counts normalized to sum 1.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::ZeroMass);
        }
        Ok(self
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect())
    }
}

pub fn bev_histogram(cloud: &PointCloud, grid: &BevGrid) -> BevHistogram {
    let mut hist = BevHistogram::zero(grid.clone());
    for p in &cloud.points {
        if let Some((bx, by)) = grid.bin_of(p.x, p.y) {
            hist.counts[bx * grid.bins_y + by] += 1;
        }
    }
    hist
}
