//! Contamination field: a square grid of intensities in `[0, 255]` that robots
//! sense under their wheels and deplete while they wait.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::Point;

/// Largest representable intensity.
pub const MAX_INTENSITY: f64 = 255.0;

/// The 9×9 cleaning footprint. Offsets are whole cells in `[-4, 4]`; the
/// amount removed from a cell is `8 - sqrt(p² + q²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CleanKernel;

impl CleanKernel {
    pub const RADIUS: i32 = 4;
    pub const PEAK: f64 = 8.0;

    pub fn decrement(p: i32, q: i32) -> f64 {
        debug_assert!(p.abs() <= Self::RADIUS && q.abs() <= Self::RADIUS);
        Self::PEAK - f64::from(p * p + q * q).sqrt()
    }

    pub fn offsets() -> impl Iterator<Item = (i32, i32)> {
        let r = Self::RADIUS;
        (-r..=r).flat_map(move |q| (-r..=r).map(move |p| (p, q)))
    }

    /// Total intensity removed by one application over cells that do not clamp.
    pub fn total() -> f64 {
        Self::offsets().map(|(p, q)| Self::decrement(p, q)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CueField {
    width_cm: f64,
    height_cm: f64,
    resolution: usize,
    nx: usize,
    ny: usize,
    cells: Vec<f64>,
}

impl CueField {
    /// An all-zero field. `resolution` is cells per centimetre.
    pub fn zeros(width_cm: f64, height_cm: f64, resolution: usize) -> Result<Self> {
        if !(width_cm > 0.0 && height_cm > 0.0) || !width_cm.is_finite() || !height_cm.is_finite()
        {
            return Err(Error::InvalidField(format!(
                "arena must have positive size, got {width_cm}×{height_cm} cm"
            )));
        }
        if resolution == 0 {
            return Err(Error::InvalidField("resolution must be ≥ 1 cell/cm".into()));
        }
        let nx = (width_cm * resolution as f64).round() as usize;
        let ny = (height_cm * resolution as f64).round() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidField("arena is smaller than one cell".into()));
        }
        Ok(Self {
            width_cm,
            height_cm,
            resolution,
            nx,
            ny,
            cells: vec![0.0; nx * ny],
        })
    }

    /// A field of constant value, clamped into `[0, 255]`.
    pub fn uniform(width_cm: f64, height_cm: f64, resolution: usize, value: f64) -> Result<Self> {
        let mut field = Self::zeros(width_cm, height_cm, resolution)?;
        field.cells.fill(value.clamp(0.0, MAX_INTENSITY));
        Ok(field)
    }

    /// A cone of height `peak` centred at `center` that falls linearly to
    /// zero at `radius_cm`. Each cell takes the value at its centre point.
    pub fn circular_gradient(
        width_cm: f64,
        height_cm: f64,
        resolution: usize,
        center: Point,
        radius_cm: f64,
        peak: f64,
    ) -> Result<Self> {
        if !(radius_cm > 0.0) || !radius_cm.is_finite() {
            return Err(Error::InvalidField(format!(
                "cue radius must be positive, got {radius_cm}"
            )));
        }
        if !(peak > 0.0 && peak <= MAX_INTENSITY) {
            return Err(Error::InvalidField(format!(
                "peak intensity must lie in (0, 255], got {peak}"
            )));
        }
        let mut field = Self::zeros(width_cm, height_cm, resolution)?;
        if !field.contains(center) {
            return Err(Error::InvalidField(format!(
                "cue centre ({}, {}) lies outside the arena",
                center.x, center.y
            )));
        }
        for j in 0..field.ny {
            for i in 0..field.nx {
                let d = field.cell_center(i, j).distance(center);
                field.cells[j * field.nx + i] = peak * (1.0 - d / radius_cm).max(0.0);
            }
        }
        Ok(field)
    }

    /// Builds a field from raw row-major cells; values are clamped into range.
    pub fn from_cells(
        width_cm: f64,
        height_cm: f64,
        resolution: usize,
        cells: Vec<f64>,
    ) -> Result<Self> {
        let mut field = Self::zeros(width_cm, height_cm, resolution)?;
        if cells.len() != field.cells.len() {
            return Err(Error::InvalidField(format!(
                "expected {} cells, got {}",
                field.cells.len(),
                cells.len()
            )));
        }
        field.cells = cells
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, MAX_INTENSITY) })
            .collect();
        Ok(field)
    }

    pub fn width_cm(&self) -> f64 {
        self.width_cm
    }

    pub fn height_cm(&self) -> f64 {
        self.height_cm
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Grid dimensions in cells (columns, rows).
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[j * self.nx + i]
    }

    pub fn set_cell(&mut self, i: usize, j: usize, value: f64) {
        self.cells[j * self.nx + i] = value.clamp(0.0, MAX_INTENSITY);
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width_cm && p.y < self.height_cm
    }

    fn cell_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    fn cell_center(&self, i: usize, j: usize) -> Point {
        let s = self.cell_size();
        Point::new((i as f64 + 0.5) * s, (j as f64 + 0.5) * s)
    }

    /// Index of the cell containing `p`, if any.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let r = self.resolution as f64;
        let i = (p.x * r).floor() as usize;
        let j = (p.y * r).floor() as usize;
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Intensity of the cell containing `p`; zero outside the arena.
    pub fn sample(&self, p: Point) -> f64 {
        self.cell_of(p).map_or(0.0, |(i, j)| self.cell(i, j))
    }

    /// One cleaning pass centred on the cell under `robot_center`. Cells
    /// outside the grid are skipped, results clamp at zero. Returns the
    /// intensity actually removed.
    pub fn apply_cleaning(&mut self, robot_center: Point) -> f64 {
        let Some((ci, cj)) = self.cell_of(robot_center) else {
            return 0.0;
        };
        let (ci, cj) = (ci as i64, cj as i64);
        let mut removed = 0.0;
        for (p, q) in CleanKernel::offsets() {
            let i = ci + i64::from(p);
            let j = cj + i64::from(q);
            if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                continue;
            }
            let idx = j as usize * self.nx + i as usize;
            let old = self.cells[idx];
            let new = (old - CleanKernel::decrement(p, q)).max(0.0);
            removed += old - new;
            self.cells[idx] = new;
        }
        removed
    }

    pub fn total_intensity(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Mean over every cell of the arena, including the zero cells outside
    /// the contaminated disc.
    pub fn mean_intensity(&self) -> f64 {
        self.total_intensity() / self.cells.len() as f64
    }

    /// Binary PGM (P5): one byte per cell, row-major, rounded intensity.
    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.nx, self.ny);
        let mut out = Vec::with_capacity(header.len() + self.cells.len());
        out.extend_from_slice(header.as_bytes());
        out.extend(self.cells.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        out
    }

    /// Lossless text dump: one CSV line per row, shortest round-trip decimals.
    pub fn to_grid_csv(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 4);
        for row in self.cells.chunks(self.nx) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`CueField::to_grid_csv`] output at 1 cell/cm.
    pub fn from_grid_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidField(format!("line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        let ny = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if ny == 0 || nx == 0 {
            return Err(Error::InvalidField("empty field grid".into()));
        }
        if rows.iter().any(|r| r.len() != nx) {
            return Err(Error::InvalidField("ragged field grid".into()));
        }
        Self::from_cells(nx as f64, ny as f64, 1, rows.concat())
    }
}
