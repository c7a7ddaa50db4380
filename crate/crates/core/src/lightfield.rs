//! Light-field data model.
//!
//! Angular coordinates are `(s, t)` with `s` the vertical and `t` the
//! horizontal view index, both centered so that `(0, 0)` is the central view.
//! Spatial coordinates inside a view are `(u, v)` = (row, column).

use std::fmt;

use crate::error::{Error, Result};

/// Angular position of one view on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewCoord {
    pub s: i32,
    pub t: i32,
}

impl ViewCoord {
    pub const CENTER: ViewCoord = ViewCoord { s: 0, t: 0 };

    pub const fn new(s: i32, t: i32) -> Self {
        Self { s, t }
    }

    /// Chebyshev distance to the grid center.
    pub fn ring(self) -> i32 {
        self.s.abs().max(self.t.abs())
    }
}

impl fmt::Display for ViewCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.s, self.t)
    }
}

/// Odd-sided angular grid `[-s_radius, s_radius] x [-t_radius, t_radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AngularGrid {
    pub s_radius: usize,
    pub t_radius: usize,
}

impl AngularGrid {
    pub const fn new(s_radius: usize, t_radius: usize) -> Self {
        Self { s_radius, t_radius }
    }

    /// Builds a grid from row/column counts; both must be odd.
    pub fn from_dims(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::DimensionMismatch(format!(
                "angular grid {rows}x{cols} must be odd-sided and non-empty"
            )));
        }
        Ok(Self::new(rows / 2, cols / 2))
    }

    pub fn rows(&self) -> usize {
        2 * self.s_radius + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.t_radius + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, c: ViewCoord) -> bool {
        c.s.unsigned_abs() as usize <= self.s_radius && c.t.unsigned_abs() as usize <= self.t_radius
    }

    /// Raster index (row-major, top-left first).
    pub fn index(&self, c: ViewCoord) -> Option<usize> {
        self.contains(c).then(|| {
            (c.s + self.s_radius as i32) as usize * self.cols() + (c.t + self.t_radius as i32) as usize
        })
    }

    pub fn coord(&self, index: usize) -> ViewCoord {
        let r = (index / self.cols()) as i32;
        let c = (index % self.cols()) as i32;
        ViewCoord::new(r - self.s_radius as i32, c - self.t_radius as i32)
    }

    /// All coordinates in raster order.
    pub fn coords(&self) -> impl Iterator<Item = ViewCoord> + '_ {
        (0..self.len()).map(|i| self.coord(i))
    }
}

/// One RGB view, stored as three planes of `height * width` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl View {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, data: vec![value; 3 * height * width] }
    }

    /// Wraps planar data (`R` plane, then `G`, then `B`).
    pub fn from_planar(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::DimensionMismatch(format!(
                "planar buffer of {} values for a {height}x{width} view",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane(&self, ch: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn plane_mut(&mut self, ch: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[ch * n..(ch + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, ch: usize, u: usize, v: usize) -> f64 {
        self.data[(ch * self.height + u) * self.width + v]
    }

    #[inline]
    pub fn set(&mut self, ch: usize, u: usize, v: usize, value: f64) {
        self.data[(ch * self.height + u) * self.width + v] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> View {
        View { height: self.height, width: self.width, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn clamp_unit(&mut self) {
        for x in &mut self.data {
            *x = x.clamp(0.0, 1.0);
        }
    }
}

/// A complete light field: one view per angular grid cell, all sharing the
/// same spatial size.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    grid: AngularGrid,
    height: usize,
    width: usize,
    views: Vec<View>,
}

impl LightField {
    /// Builds a light field from views in raster order.
    pub fn new(grid: AngularGrid, views: Vec<View>) -> Result<Self> {
        if views.len() != grid.len() {
            let first_missing = grid.coord(views.len().min(grid.len() - 1));
            return Err(Error::MissingView { s: first_missing.s, t: first_missing.t });
        }
        let (height, width) = views[0].dims();
        if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.dims() != (height, width)) {
            return Err(Error::DimensionMismatch(format!(
                "view {} is {}x{}, expected {height}x{width}",
                grid.coord(i),
                v.height(),
                v.width()
            )));
        }
        Ok(Self { grid, height, width, views })
    }

    /// Builds a light field from a per-coordinate generator.
    pub fn from_fn(grid: AngularGrid, mut f: impl FnMut(ViewCoord) -> View) -> Result<Self> {
        let views = grid.coords().map(&mut f).collect();
        Self::new(grid, views)
    }

    pub fn grid(&self) -> AngularGrid {
        self.grid
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn view(&self, c: ViewCoord) -> Option<&View> {
        self.grid.index(c).map(|i| &self.views[i])
    }

    pub fn view_mut(&mut self, c: ViewCoord) -> Option<&mut View> {
        self.grid.index(c).map(move |i| &mut self.views[i])
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    /// Iterates `(coord, view)` in raster order.
    pub fn iter(&self) -> impl Iterator<Item = (ViewCoord, &View)> {
        self.views.iter().enumerate().map(|(i, v)| (self.grid.coord(i), v))
    }

    /// Keeps the central `rows x cols` views.
    pub fn crop_angular(&self, rows: usize, cols: usize) -> Result<LightField> {
        let grid = AngularGrid::from_dims(rows, cols)?;
        if grid.s_radius > self.grid.s_radius || grid.t_radius > self.grid.t_radius {
            return Err(Error::DimensionMismatch(format!(
                "cannot crop {}x{} views out of a {}x{} grid",
                rows,
                cols,
                self.grid.rows(),
                self.grid.cols()
            )));
        }
        LightField::from_fn(grid, |c| self.view(c).expect("inside parent grid").clone())
    }

    /// Number of 8-bit samples needed to store the field uncompressed.
    pub fn raw_bytes(&self) -> usize {
        self.grid.len() * 3 * self.height * self.width
    }

    pub fn same_dims(&self, other: &LightField) -> Result<()> {
        if self.grid != other.grid || self.height != other.height || self.width != other.width {
            return Err(Error::DimensionMismatch(format!(
                "light fields {}x{}x{}x{} and {}x{}x{}x{}",
                self.grid.rows(),
                self.grid.cols(),
                self.height,
                self.width,
                other.grid.rows(),
                other.grid.cols(),
                other.height,
                other.width
            )));
        }
        Ok(())
    }
}
