//! POVM families in Wigner form and the completeness check
//! `(4π)^m Σ_a W_a(x) w_a = 1`, where `w_a` is the outcome measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::fock::fock_wigner_radial;
use crate::phase_space::{identity_wigner, PhaseGrid, FOUR_PI};

/// Completeness defects above this mark a family as un-normalised.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-4;

/// A measurement on one party, described by the Wigner functions of its
/// outcome operators.
pub trait PovmFamily: Send + Sync + Debug {
    fn kind(&self) -> &'static str;
    fn modes(&self) -> usize;
    fn outcome_count(&self) -> usize;
    /// Coordinates (continuous outcomes) or index (discrete ones) of outcome `k`.
    fn outcome_label(&self, k: usize) -> Vec<f64>;
    /// Measure attached to outcome `k`: a cell volume for gridded continua, 1
    /// for discrete outcomes.
    fn outcome_weight(&self, k: usize) -> f64;
    fn wigner(&self, k: usize, x: &[f64]) -> f64;
    /// Every element has a strictly positive Wigner function.
    fn positive(&self) -> bool;
    /// The elements resolve the identity (no remainder).
    fn complete(&self) -> bool;
    fn descriptor(&self) -> PovmDescriptor;
}

/// JSON descriptor, `{"kind": ..., params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PovmDescriptor {
    Heterodyne {
        half_width: f64,
        points: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Fock {
        cutoff: usize,
    },
    Identity {
        modes: usize,
    },
}

impl PovmDescriptor {
    pub fn build(&self) -> Result<Box<dyn PovmFamily>> {
        Ok(match self {
            PovmDescriptor::Heterodyne {
                half_width,
                points,
                center,
            } => {
                let center = center.clone().unwrap_or_else(|| vec![0.0, 0.0]);
                Box::new(heterodyne_family(PhaseGrid::new(center, *half_width, *points)?)?)
            }
            PovmDescriptor::Fock { cutoff } => Box::new(fock_projector_family(*cutoff)),
            PovmDescriptor::Identity { modes } => Box::new(IdentityMeasurement::new(*modes)?),
        })
    }
}

/// Coherent-state projections `|α⟩⟨α|/4π` on a grid of outcomes.
#[derive(Clone, Debug)]
pub struct Heterodyne {
    outcomes: PhaseGrid,
}

/// Heterodyne detection of one mode with outcomes on `grid`. The element for
/// outcome `a` has Wigner function `e^{-‖x−a‖²/2} / (8π²)`.
pub fn heterodyne_family(grid: PhaseGrid) -> Result<Heterodyne> {
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: grid.dim(),
        });
    }
    Ok(Heterodyne { outcomes: grid })
}

impl Heterodyne {
    pub fn outcome_grid(&self) -> &PhaseGrid {
        &self.outcomes
    }

    pub fn element(a: &[f64], x: &[f64]) -> f64 {
        let d0 = x[0] - a[0];
        let d1 = x[1] - a[1];
        (-(d0 * d0 + d1 * d1) / 2.0).exp() / (8.0 * PI * PI)
    }
}

impl PovmFamily for Heterodyne {
    fn kind(&self) -> &'static str {
        "heterodyne"
    }

    fn modes(&self) -> usize {
        1
    }

    fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    fn outcome_label(&self, k: usize) -> Vec<f64> {
        self.outcomes.point(k)
    }

    fn outcome_weight(&self, _k: usize) -> f64 {
        self.outcomes.cell_volume()
    }

    fn wigner(&self, k: usize, x: &[f64]) -> f64 {
        let mut a = [0.0; 2];
        self.outcomes.point_into(k, &mut a);
        Self::element(&a, x)
    }

    fn positive(&self) -> bool {
        true
    }

    fn complete(&self) -> bool {
        true
    }

    fn descriptor(&self) -> PovmDescriptor {
        PovmDescriptor::Heterodyne {
            half_width: self.outcomes.half_width(),
            points: self.outcomes.points_per_axis(),
            center: Some(self.outcomes.center().to_vec()),
        }
    }
}

/// Photon-number projectors `|m⟩⟨m|` for `m ≤ cutoff`; the remainder
/// `Σ_{m > cutoff}` is not represented.
#[derive(Clone, Debug)]
pub struct FockProjectors {
    cutoff: usize,
}

pub fn fock_projector_family(cutoff: usize) -> FockProjectors {
    FockProjectors { cutoff }
}

impl PovmFamily for FockProjectors {
    fn kind(&self) -> &'static str {
        "fock"
    }

    fn modes(&self) -> usize {
        1
    }

    fn outcome_count(&self) -> usize {
        self.cutoff + 1
    }

    fn outcome_label(&self, k: usize) -> Vec<f64> {
        vec![k as f64]
    }

    fn outcome_weight(&self, _k: usize) -> f64 {
        1.0
    }

    fn wigner(&self, k: usize, x: &[f64]) -> f64 {
        fock_wigner_radial(k, x[0] * x[0] + x[1] * x[1])
    }

    fn positive(&self) -> bool {
        false
    }

    fn complete(&self) -> bool {
        false
    }

    fn descriptor(&self) -> PovmDescriptor {
        PovmDescriptor::Fock {
            cutoff: self.cutoff,
        }
    }
}

/// The trivial single-outcome measurement, `W = 1/(4π)^m`.
#[derive(Clone, Debug)]
pub struct IdentityMeasurement {
    modes: usize,
}

impl IdentityMeasurement {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::ZeroModes);
        }
        Ok(Self { modes })
    }
}

impl PovmFamily for IdentityMeasurement {
    fn kind(&self) -> &'static str {
        "identity"
    }

    fn modes(&self) -> usize {
        self.modes
    }

    fn outcome_count(&self) -> usize {
        1
    }

    fn outcome_label(&self, _k: usize) -> Vec<f64> {
        vec![0.0]
    }

    fn outcome_weight(&self, _k: usize) -> f64 {
        1.0
    }

    fn wigner(&self, _k: usize, _x: &[f64]) -> f64 {
        identity_wigner(self.modes)
    }

    fn positive(&self) -> bool {
        true
    }

    fn complete(&self) -> bool {
        true
    }

    fn descriptor(&self) -> PovmDescriptor {
        PovmDescriptor::Identity { modes: self.modes }
    }
}

/// `max_x |(4π)^m Σ_a W_a(x) w_a − 1|` over the probe points.
pub fn completeness_defect(family: &dyn PovmFamily, probes: &[Vec<f64>]) -> f64 {
    let scale = FOUR_PI.powi(family.modes() as i32);
    probes
        .par_iter()
        .map(|x| {
            let s: f64 = (0..family.outcome_count())
                .map(|k| family.wigner(k, x) * family.outcome_weight(k))
                .sum();
            (scale * s - 1.0).abs()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Outcome probabilities `(4π)^m ∫ W_a W_ρ · w_a`, integrating the state's
/// Wigner function `rho` over `grid`.
pub fn outcome_probabilities<F>(family: &dyn PovmFamily, rho: F, grid: &PhaseGrid) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if grid.dim() != 2 * family.modes() {
        return Err(Error::DimensionMismatch {
            expected: 2 * family.modes(),
            got: grid.dim(),
        });
    }
    let nodes = grid.nodes();
    let d = grid.dim();
    let state: Vec<f64> = nodes.par_chunks(d).map(&rho).collect();
    let scale = FOUR_PI.powi(family.modes() as i32) * grid.cell_volume();
    Ok((0..family.outcome_count())
        .into_par_iter()
        .map(|k| {
            let s: f64 = nodes
                .chunks(d)
                .zip(&state)
                .map(|(x, r)| family.wigner(k, x) * r)
                .sum();
            scale * s * family.outcome_weight(k)
        })
        .collect())
}

/// Errors if any element is negative at a sampled point; used before
/// treating a family as Wigner-positive.
pub fn assert_positive_on(family: &dyn PovmFamily, points: &[Vec<f64>]) -> Result<()> {
    for k in 0..family.outcome_count() {
        for x in points {
            let v = family.wigner(k, x);
            if !(v > 0.0) {
                return Err(Error::NegativeMeasurement { outcome: k, value: v });
            }
        }
    }
    Ok(())
}
