use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{PhaseGrid, PhaseSpacePoint, FOUR_PI};
use crate::error::{Error, Result};

/// A real function sampled on the nodes of a [`PhaseGrid`].
///
/// `axes` names each grid axis (`qA1`, `pB1`, ...) so that fields covering
/// different subsystems cannot be paired by accident.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    grid: PhaseGrid,
    axes: Vec<String>,
    values: Vec<f64>,
}

impl WignerField {
    pub fn new(grid: PhaseGrid, axes: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if axes.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: axes.len(),
            });
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, axes, values })
    }

    /// Samples `f` at every node. Evaluation runs in parallel; the result is
    /// independent of the thread count.
    pub fn from_fn<F>(grid: PhaseGrid, axes: Vec<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let d = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; d],
                |x, i| {
                    grid.point_into(i, x);
                    f(x)
                },
            )
            .collect();
        Self::new(grid, axes, values)
    }

    pub fn zeros(grid: PhaseGrid, axes: Vec<String>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, axes, vec![0.0; n])
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Number of modes covered, when the field spans whole modes.
    pub fn modes(&self) -> Option<usize> {
        (self.dim() % 2 == 0).then_some(self.dim() / 2)
    }

    fn compatible(&self, other: &Self) -> bool {
        self.grid.same_nodes(&other.grid) && self.axes == other.axes
    }

    /// Midpoint-rule integral: sum of node values times the cell volume.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// The expectation pairing `(4π)^m ∫ W₁ W₂`.
    pub fn pair(&self, other: &Self) -> Result<f64> {
        if !self.compatible(other) {
            return Err(Error::GridMismatch);
        }
        let modes = self.modes().ok_or_else(|| {
            Error::InvalidParameter("pairing needs an even number of axes".into())
        })?;
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(FOUR_PI.powi(modes as i32) * dot * self.grid.cell_volume())
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !self.compatible(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.grid.clone(), self.axes.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            axes: self.axes.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Integrates out every axis not listed in `kept`.
    pub fn marginal(&self, kept: &[usize]) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::EmptyAxes);
        }
        let d = self.dim();
        let mut kept: Vec<usize> = kept.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&axis) = kept.iter().find(|&&a| a >= d) {
            return Err(Error::AxisOutOfRange { axis, dim: d });
        }
        if kept.len() == d {
            return Ok(self.clone());
        }
        let n = self.grid.points_per_axis();
        let center: Vec<f64> = kept.iter().map(|&a| self.grid.center()[a]).collect();
        let out_grid = PhaseGrid::new(center, self.grid.half_width(), n)?;
        let dropped = d - kept.len();
        let weight = self.grid.step().powi(dropped as i32);

        let mut out = vec![0.0; out_grid.len()];
        let mut multi = vec![0usize; d];
        for (idx, &v) in self.values.iter().enumerate() {
            let mut rem = idx;
            for axis in (0..d).rev() {
                multi[axis] = rem % n;
                rem /= n;
            }
            let target = kept.iter().fold(0, |acc, &a| acc * n + multi[a]);
            out[target] += v;
        }
        out.iter_mut().for_each(|v| *v *= weight);
        let axes = kept.iter().map(|&a| self.axes[a].clone()).collect();
        Self::new(out_grid, axes, out)
    }

    /// Smallest sampled value and its node (first node on ties).
    pub fn min_value(&self) -> (f64, PhaseSpacePoint) {
        let (idx, &v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, &f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            });
        (v, PhaseSpacePoint::new(self.grid.point(idx)).expect("grid nodes are finite"))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ max(0, -W)`.
    pub fn negative_volume(&self) -> f64 {
        self.values.iter().map(|v| (-v).max(0.0)).sum::<f64>() * self.grid.cell_volume()
    }

    /// Multilinear interpolation between nodes; zero outside the node range.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        if x.len() != d {
            return f64::NAN;
        }
        let n = self.grid.points_per_axis();
        let h = self.grid.step();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for axis in 0..d {
            let t = (x[axis] - self.grid.center()[axis] + self.grid.half_width()) / h;
            if !(0.0..=(n - 1) as f64).contains(&t) {
                return 0.0;
            }
            let i = (t.floor() as usize).min(n - 2);
            base[axis] = i;
            frac[axis] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for axis in 0..d {
                let bit = (corner >> (d - 1 - axis)) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                idx = idx * n + base[axis] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Zeroth, first and second moments: `(∫W, mean, covariance)` with the
    /// mean and covariance normalised by `∫W`.
    pub fn moments(&self) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(d);
        let mut s2 = DMatrix::zeros(d, d);
        let mut x = vec![0.0; d];
        for (i, &v) in self.values.iter().enumerate() {
            self.grid.point_into(i, &mut x);
            s0 += v;
            for a in 0..d {
                s1[a] += v * x[a];
                for b in 0..d {
                    s2[(a, b)] += v * x[a] * x[b];
                }
            }
        }
        let mean = &s1 / s0;
        let cov = &s2 / s0 - &mean * mean.transpose();
        (s0 * self.grid.cell_volume(), mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{axis_labels, identity_wigner, Party};
    use std::f64::consts::PI;

    fn vacuum(grid: PhaseGrid) -> WignerField {
        WignerField::from_fn(grid, axis_labels(Party::Alice, 1), |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI)
        })
        .unwrap()
    }

    #[test]
    fn vacuum_normalised() {
        let w = vacuum(PhaseGrid::centered(2, 8.0, 128).unwrap());
        assert!((w.integrate() - 1.0).abs() < 1e-6);
        assert!((w.pair(&w).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = PhaseGrid::centered(2, 8.0, 32).unwrap();
        let z = WignerField::zeros(g, axis_labels(Party::Bob, 1)).unwrap();
        assert_eq!(z.integrate(), 0.0);
    }

    #[test]
    fn identity_pairs_to_trace() {
        let g = PhaseGrid::centered(2, 8.0, 128).unwrap();
        let w = vacuum(g.clone());
        let id = WignerField::from_fn(g, axis_labels(Party::Alice, 1), |_| identity_wigner(1))
            .unwrap();
        assert!((id.pair(&w).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_rejects_grid_mismatch() {
        let a = vacuum(PhaseGrid::centered(2, 8.0, 32).unwrap());
        let b = vacuum(PhaseGrid::centered(2, 8.0, 64).unwrap());
        assert!(matches!(a.pair(&b), Err(Error::GridMismatch)));
        let c = WignerField::new(
            a.grid().clone(),
            axis_labels(Party::Bob, 1),
            a.values().to_vec(),
        )
        .unwrap();
        assert!(matches!(a.pair(&c), Err(Error::GridMismatch)));
    }

    #[test]
    fn marginal_of_product_recovers_factor() {
        let g4 = PhaseGrid::centered(4, 11.0, 40).unwrap();
        let g2 = PhaseGrid::centered(2, 11.0, 40).unwrap();
        let thermal = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 6.0).exp() / (6.0 * PI);
        let labels: Vec<String> = axis_labels(Party::Alice, 1)
            .into_iter()
            .chain(axis_labels(Party::Bob, 1))
            .collect();
        let joint = WignerField::from_fn(g4, labels, |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI) * thermal(&x[2..])
        })
        .unwrap();
        let alice = joint.marginal(&[0, 1]).unwrap();
        let expected = vacuum(g2);
        assert_eq!(alice.axes(), expected.axes());
        for (a, b) in alice.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn marginal_errors_and_identity() {
        let w = vacuum(PhaseGrid::centered(2, 8.0, 16).unwrap());
        assert!(matches!(w.marginal(&[]), Err(Error::EmptyAxes)));
        assert!(matches!(
            w.marginal(&[2]),
            Err(Error::AxisOutOfRange { axis: 2, dim: 2 })
        ));
        assert_eq!(w.marginal(&[1, 0]).unwrap(), w);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_functions() {
        let g = PhaseGrid::centered(2, 4.0, 16).unwrap();
        let f = WignerField::from_fn(g.clone(), axis_labels(Party::Alice, 1), |x| {
            2.0 * x[0] - x[1] + 0.5
        })
        .unwrap();
        for i in [0, 17, 100, 255] {
            let x = g.point(i);
            assert!((f.interpolate(&x) - f.values()[i]).abs() < 1e-12);
        }
        assert!((f.interpolate(&[0.3, -1.1]) - (0.6 + 1.1 + 0.5)).abs() < 1e-12);
        assert_eq!(f.interpolate(&[10.0, 0.0]), 0.0);
    }

    #[test]
    fn min_value_finds_node() {
        let g = PhaseGrid::centered(2, 4.0, 16).unwrap();
        let f = WignerField::from_fn(g, axis_labels(Party::Alice, 1), |x| {
            (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2) - 3.0
        })
        .unwrap();
        let (v, at) = f.min_value();
        assert_eq!(at.coords(), &[1.0, -0.5]);
        assert_eq!(v, -3.0);
    }

    #[test]
    fn moments_of_displaced_vacuum() {
        let g = PhaseGrid::centered(2, 9.0, 96).unwrap();
        let f = WignerField::from_fn(g, axis_labels(Party::Bob, 1), |x| {
            (-((x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2)) / 2.0).exp() / (2.0 * PI)
        })
        .unwrap();
        let (norm, mean, cov) = f.moments();
        assert!((norm - 1.0).abs() < 1e-8);
        assert!((mean[0] - 1.0).abs() < 1e-8 && (mean[1] + 0.5).abs() < 1e-8);
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-7 && cov[(0, 1)].abs() < 1e-8);
    }
}
