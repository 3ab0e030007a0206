//! Phase-space geometry, uniform grids and quadrature over sampled Wigner functions.
//!
//! Conventions are fixed throughout the crate: quadratures obey `[q, p] = 2i`,
//! so the vacuum has unit variance and the identity operator has the constant
//! Wigner function `1 / (4π)^m`. Coordinates are ordered `(q1, p1, q2, p2, ...)`
//! with Alice's modes first.

mod field;
mod grid;
pub mod io;

pub use field::WignerField;
pub use grid::PhaseGrid;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Constant Wigner function of the identity on `modes` modes.
pub fn identity_wigner(modes: usize) -> f64 {
    FOUR_PI.powi(modes as i32).recip()
}

/// Split of the modes between Alice (first) and Bob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLayout {
    n_alice_modes: usize,
    n_bob_modes: usize,
}

impl ModeLayout {
    pub fn new(n_alice_modes: usize, n_bob_modes: usize) -> Result<Self> {
        if n_alice_modes == 0 || n_bob_modes == 0 {
            return Err(Error::ZeroModes);
        }
        Ok(Self {
            n_alice_modes,
            n_bob_modes,
        })
    }

    /// One mode on each side.
    pub fn single() -> Self {
        Self {
            n_alice_modes: 1,
            n_bob_modes: 1,
        }
    }

    pub fn alice_modes(&self) -> usize {
        self.n_alice_modes
    }

    pub fn bob_modes(&self) -> usize {
        self.n_bob_modes
    }

    pub fn total_modes(&self) -> usize {
        self.n_alice_modes + self.n_bob_modes
    }

    pub fn alice_dim(&self) -> usize {
        2 * self.n_alice_modes
    }

    pub fn bob_dim(&self) -> usize {
        2 * self.n_bob_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.total_modes()
    }

    /// Splits a joint coordinate vector into `(x_A, x_B)`.
    pub fn split<'a>(&self, x: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.split_at(self.alice_dim()))
    }
}

/// Which side of the bipartition a field or axis belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    fn tag(self) -> char {
        match self {
            Party::Alice => 'A',
            Party::Bob => 'B',
        }
    }
}

/// Axis labels `qA1, pA1, ...` for `modes` modes of one party.
pub fn axis_labels(party: Party, modes: usize) -> Vec<String> {
    (1..=modes)
        .flat_map(|k| {
            let t = party.tag();
            [format!("q{t}{k}"), format!("p{t}{k}")]
        })
        .collect()
}

/// Axis labels for the full joint phase space of `layout`.
pub fn joint_axis_labels(layout: ModeLayout) -> Vec<String> {
    let mut labels = axis_labels(Party::Alice, layout.alice_modes());
    labels.extend(axis_labels(Party::Bob, layout.bob_modes()));
    labels
}

/// The symplectic form `⊕ [[0, 1], [-1, 0]]` on `modes` modes.
pub fn symplectic_form(modes: usize) -> Result<DMatrix<f64>> {
    if modes == 0 {
        return Err(Error::ZeroModes);
    }
    let n = 2 * modes;
    let mut omega = DMatrix::zeros(n, n);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    Ok(omega)
}

/// Applies `Ω` to a vector without building the matrix.
pub(crate) fn omega_apply(v: &[f64]) -> Vec<f64> {
    v.chunks_exact(2).flat_map(|c| [c[1], -c[0]]).collect()
}

/// Applies `Ωᵀ` to a vector.
pub(crate) fn omega_t_apply(v: &[f64]) -> Vec<f64> {
    v.chunks_exact(2).flat_map(|c| [-c[1], c[0]]).collect()
}

/// A point of phase space with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseSpacePoint(Vec<f64>);

impl PhaseSpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PhaseSpacePoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symplectic_single_mode() {
        let omega = symplectic_form(1).unwrap();
        assert_eq!(omega, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn symplectic_two_modes_is_direct_sum() {
        let omega = symplectic_form(2).unwrap();
        let block = symplectic_form(1).unwrap();
        assert_eq!(omega.view((0, 0), (2, 2)), block);
        assert_eq!(omega.view((2, 2), (2, 2)), block);
        assert!(omega.view((0, 2), (2, 2)).iter().all(|&v| v == 0.0));
        assert!(omega.view((2, 0), (2, 2)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symplectic_identities_exact() {
        for m in 1..=8 {
            let omega = symplectic_form(m).unwrap();
            let id = DMatrix::<f64>::identity(2 * m, 2 * m);
            assert_eq!(omega.transpose() * &omega, id);
            assert_eq!(&omega * &omega, -id.clone());
            assert_eq!(&omega * omega.transpose(), id);
            assert_eq!(omega.transpose(), -omega);
        }
    }

    #[test]
    fn symplectic_zero_rejected() {
        assert!(matches!(symplectic_form(0), Err(Error::ZeroModes)));
    }

    #[test]
    fn omega_helpers_match_matrix() {
        let v = [0.3, -1.2, 2.0, 0.5];
        let omega = symplectic_form(2).unwrap();
        let dv = nalgebra::DVector::from_column_slice(&v);
        assert_eq!(omega_apply(&v), (&omega * &dv).as_slice());
        assert_eq!(omega_t_apply(&v), (omega.transpose() * &dv).as_slice());
    }

    #[test]
    fn layout_rejects_empty_party() {
        assert!(ModeLayout::new(0, 1).is_err());
        assert!(ModeLayout::new(1, 0).is_err());
        let l = ModeLayout::new(2, 1).unwrap();
        assert_eq!(l.dim(), 6);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (a, b) = l.split(&x).unwrap();
        assert_eq!(a, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b, &[5.0, 6.0]);
    }

    #[test]
    fn labels() {
        assert_eq!(
            joint_axis_labels(ModeLayout::single()),
            vec!["qA1", "pA1", "qB1", "pB1"]
        );
    }

    #[test]
    fn point_rejects_nan() {
        assert!(PhaseSpacePoint::new(vec![0.0, f64::NAN]).is_err());
    }
}
