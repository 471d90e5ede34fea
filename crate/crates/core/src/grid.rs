//! Raster types and the ego-anchored BEV window geometry.
//!
//! Axis convention: +x world is "forward" along the anchor yaw, +y is to its left.
//! Row 0 is the farthest-forward edge of the window and column 0 the leftmost one,
//! so forward motion decreases the row index and leftward motion decreases the
//! column index. Integer fractional coordinates denote cell centers; cell `(r, c)`
//! covers `[r - 0.5, r + 0.5) x [c - 0.5, c + 0.5)`. The anchor sits at the center
//! of cell `(H / 2, W / 2)` (integer division).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Maps a point from this pose's local frame to world coordinates.
    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }
}

/// Re-expresses points given in the `from` frame in the `to` frame.
pub fn rigid_transform(points: &[[f64; 2]], from: &Pose2D, to: &Pose2D) -> Vec<[f64; 2]> {
    points
        .iter()
        .map(|&p| to.to_local(from.to_world(p)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub anchor: Pose2D,
}

impl GridSpec {
    pub fn new(height: usize, width: usize, resolution: f64, anchor: Pose2D) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid must be non-empty, got {height}x{width}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            height,
            width,
            resolution,
            anchor,
        })
    }

    /// 100 m x 100 m at 0.5 m.
    pub fn long_range(anchor: Pose2D) -> Self {
        Self {
            height: 200,
            width: 200,
            resolution: 0.5,
            anchor,
        }
    }

    /// 30 m x 30 m at 0.15 m.
    pub fn short_range(anchor: Pose2D) -> Self {
        Self {
            height: 200,
            width: 200,
            resolution: 0.15,
            anchor,
        }
    }

    pub fn with_anchor(&self, anchor: Pose2D) -> Self {
        Self { anchor, ..*self }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn center_cell(&self) -> (f64, f64) {
        ((self.height / 2) as f64, (self.width / 2) as f64)
    }

    /// Fractional cell coordinates of a point given in the anchor's local frame,
    /// without bounds checking.
    pub fn local_to_cell(&self, local: [f64; 2]) -> (f64, f64) {
        let (r0, c0) = self.center_cell();
        (
            r0 - local[0] / self.resolution,
            c0 - local[1] / self.resolution,
        )
    }

    pub fn cell_to_local(&self, row: f64, col: f64) -> [f64; 2] {
        let (r0, c0) = self.center_cell();
        [(r0 - row) * self.resolution, (c0 - col) * self.resolution]
    }

    pub fn contains_cell(&self, row: f64, col: f64) -> bool {
        row >= -0.5
            && row < self.height as f64 - 0.5
            && col >= -0.5
            && col < self.width as f64 - 0.5
    }

    /// Fractional `(row, col)` of a world point, or `None` when it falls outside the window.
    pub fn world_to_grid(&self, p: [f64; 2]) -> Option<(f64, f64)> {
        let (row, col) = self.local_to_cell(self.anchor.to_local(p));
        self.contains_cell(row, col).then_some((row, col))
    }

    pub fn grid_to_world(&self, row: f64, col: f64) -> Result<[f64; 2]> {
        if !self.contains_cell(row, col) {
            return Err(Error::OutOfBounds(row, col));
        }
        Ok(self.anchor.to_world(self.cell_to_local(row, col)))
    }

    /// Nearest integer cell of a fractional coordinate, if it is inside the grid.
    pub fn nearest_cell(&self, row: f64, col: f64) -> Option<(usize, usize)> {
        nearest_cell(self.height, self.width, row, col)
    }
}

/// Rounds half away from zero and bounds-checks against an `h x w` raster.
pub fn nearest_cell(h: usize, w: usize, row: f64, col: f64) -> Option<(usize, usize)> {
    let r = row.round();
    let c = col.round();
    if r >= 0.0 && c >= 0.0 && (r as usize) < h && (c as usize) < w {
        Some((r as usize, c as usize))
    } else {
        None
    }
}

/// Dense row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![T::default(); height * width],
        }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::LengthMismatch(data.len(), height * width));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

/// Per-cell probability map.
#[derive(Debug, Clone, PartialEq)]
pub struct SegGrid(Grid<f32>);

impl SegGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Grid::zeros(height, width))
    }

    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!(
                "segmentation value {bad} outside [0, 1]"
            )));
        }
        Ok(Self(Grid::from_vec(height, width, values)?))
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        Self(Grid::from_fn(height, width, |r, c| f(r, c).clamp(0.0, 1.0)))
    }

    /// Binary mask `inst != 0`.
    pub fn from_instances(inst: &InstanceGrid) -> Self {
        let (h, w) = inst.shape();
        Self::from_fn(h, w, |r, c| if inst.get(r, c) != 0 { 1.0 } else { 0.0 })
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.0.get(row, col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.0.set(row, col, value.clamp(0.0, 1.0));
    }

    pub fn values(&self) -> &[f32] {
        self.0.as_slice()
    }

    pub fn binarize(&self, threshold: f32) -> Vec<bool> {
        self.values().iter().map(|&v| v >= threshold).collect()
    }
}

/// Per-cell instance identifiers, 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGrid(Grid<u32>);

impl InstanceGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Grid::zeros(height, width))
    }

    pub fn new(height: usize, width: usize, ids: Vec<u32>) -> Result<Self> {
        Ok(Self(Grid::from_vec(height, width, ids)?))
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize) -> u32) -> Self {
        Self(Grid::from_fn(height, width, f))
    }

    pub fn grid(&self) -> &Grid<u32> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.0.get(row, col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, id: u32) {
        self.0.set(row, col, id);
    }

    pub fn ids(&self) -> &[u32] {
        self.0.as_slice()
    }

    /// Distinct non-zero IDs in ascending order.
    pub fn unique_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.ids().iter().copied().filter(|&i| i != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn foreground_count(&self) -> usize {
        self.ids().iter().filter(|&&i| i != 0).count()
    }

    /// Applies `f` to every non-zero ID.
    pub fn relabel(&self, mut f: impl FnMut(u32) -> u32) -> Self {
        let (h, w) = self.shape();
        Self::from_fn(h, w, |r, c| match self.get(r, c) {
            0 => 0,
            id => f(id),
        })
    }
}

/// Two-channel displacement field in cell units (`dy` along rows, `dx` along columns).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGrid {
    dy: Grid<f32>,
    dx: Grid<f32>,
}

impl FlowGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            dy: Grid::zeros(height, width),
            dx: Grid::zeros(height, width),
        }
    }

    pub fn new(height: usize, width: usize, dy: Vec<f32>, dx: Vec<f32>) -> Result<Self> {
        if dy.iter().chain(dx.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite flow value".into()));
        }
        Ok(Self {
            dy: Grid::from_vec(height, width, dy)?,
            dx: Grid::from_vec(height, width, dx)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.dy.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> (f32, f32) {
        (self.dy.get(row, col), self.dx.get(row, col))
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, (dy, dx): (f32, f32)) {
        self.dy.set(row, col, dy);
        self.dx.set(row, col, dx);
    }

    pub fn dy(&self) -> &Grid<f32> {
        &self.dy
    }

    pub fn dx(&self) -> &Grid<f32> {
        &self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub id: u32,
    pub row: f64,
    pub col: f64,
    pub score: f32,
}

/// Instance centers in fractional cell coordinates, unique by ID.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CenterList(Vec<Center>);

impl CenterList {
    pub fn new(entries: Vec<Center>) -> Result<Self> {
        let mut ids: Vec<u32> = entries.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Internal("duplicate center id".into()));
        }
        Ok(Self(entries))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Center> {
        self.0.iter()
    }

    pub fn get(&self, id: u32) -> Option<&Center> {
        self.0.iter().find(|c| c.id == id)
    }

    pub fn as_slice(&self) -> &[Center] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a CenterList {
    type Item = &'a Center;
    type IntoIter = std::slice::Iter<'a, Center>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
