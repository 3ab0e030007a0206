use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform hypercubic grid of `points^dim` nodes.
///
/// Along every axis the nodes sit at `center - L + i·h` for `i = 0..N`, with
/// `h = 2L/N`. Each node carries one cell of volume `h^dim`; because `N` is
/// even the center itself is always a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    center: Vec<f64>,
    half_width: f64,
    points: usize,
}

impl PhaseGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(center: Vec<f64>, half_width: f64, points: usize) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidGrid("zero-dimensional grid".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if points < Self::MIN_POINTS || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least {}, got {points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            center,
            half_width,
            points,
        })
    }

    /// Grid centered on the origin.
    pub fn centered(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], half_width, points)
    }

    /// Same box, different resolution.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.center.clone(), self.half_width, points)
    }

    /// The coarser (`N/2`) or, for the smallest grids, finer (`2N`) companion
    /// grid used to estimate quadrature error.
    pub fn refinement_partner(&self) -> Self {
        let half = self.points / 2;
        let points = if half >= Self::MIN_POINTS && half % 2 == 0 {
            half
        } else {
            self.points * 2
        };
        Self {
            center: self.center.clone(),
            half_width: self.half_width,
            points,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.step().powi(self.dim() as i32)
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + i as f64 * self.step()
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(axis, i)).collect()
    }

    /// Coordinates of node `index` (row-major, last axis fastest).
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point_into(index, &mut x);
        x
    }

    pub fn point_into(&self, mut index: usize, out: &mut [f64]) {
        for axis in (0..self.dim()).rev() {
            let i = index % self.points;
            index /= self.points;
            out[axis] = self.coord(axis, i);
        }
    }

    /// All node coordinates, flattened `len() × dim()`.
    pub fn nodes(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        for (idx, chunk) in out.chunks_exact_mut(d).enumerate() {
            self.point_into(idx, chunk);
        }
        out
    }

    /// Flat index of the node nearest to `x`, if `x` lies within the grid cells.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let h = self.step();
        let mut index = 0;
        for (axis, &xa) in x.iter().enumerate() {
            let t = ((xa - self.center[axis] + self.half_width) / h).round();
            if !(0.0..self.points as f64).contains(&t) {
                return None;
            }
            index = index * self.points + t as usize;
        }
        Some(index)
    }

    /// True when both grids sample exactly the same nodes.
    pub fn same_nodes(&self, other: &Self) -> bool {
        self == other
    }
}
