//! Conditional Wigner functions `W(x_B|x_A) = W(x_A⊕x_B) / W_A(x_A)`,
//! physicality witnesses, conditional quasi-probabilities and heralded
//! (remote) state preparation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{fock_wigner_levels, fock_wigner_radial, FockMixtureState};
use crate::gaussian::{
    conditional_gaussian, number_witness_matrix, williamson, GaussianDensity, GaussianState,
};
use crate::phase_space::{
    axis_labels, omega_apply, Party, PhaseGrid, PhaseSpacePoint, WignerField, FOUR_PI,
    ModeLayout,
};

/// Conditioning requires `W_A(x_A) > POSITIVITY_FLOOR · max W_A`.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// Heralding requires an outcome probability above this.
pub const PROBABILITY_FLOOR: f64 = 1e-10;
pub const DEFAULT_MAX_FOCK: usize = 30;
pub const DEFAULT_QUADRATURE_POINTS: usize = 128;
/// Quadrature error bounds are this multiple of the refinement delta.
pub const REFINEMENT_SAFETY: f64 = 10.0;
const ROUNDOFF: f64 = 1e-12;
/// Half-width of default grids, in standard deviations.
const GRID_SIGMAS: f64 = 6.0;

/// A Wigner function over one party's phase space, kept in closed form when
/// one is available.
#[derive(Clone, Debug)]
pub enum PartyWigner {
    Gaussian(GaussianDensity),
    /// Single-mode `Σ wₙ W_{|n⟩⟨n|}` with possibly signed weights.
    /// `relative_error` bounds the relative truncation error of each weight.
    FockSeries {
        weights: Vec<f64>,
        relative_error: f64,
    },
    Field(WignerField),
}

impl PartyWigner {
    pub fn modes(&self) -> usize {
        match self {
            PartyWigner::Gaussian(g) => g.dim() / 2,
            PartyWigner::FockSeries { .. } => 1,
            PartyWigner::Field(f) => f.dim() / 2,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PartyWigner::Gaussian(g) => g.eval_unchecked(x),
            PartyWigner::FockSeries { weights, .. } => {
                let u = x[0] * x[0] + x[1] * x[1];
                weights
                    .iter()
                    .zip(fock_wigner_levels(weights.len() - 1, u))
                    .map(|(w, l)| w * l)
                    .sum()
            }
            PartyWigner::Field(f) => f.interpolate(x),
        }
    }

    /// `(∫W, mean, covariance)`, mean and covariance normalised by `∫W`.
    pub fn moments(&self) -> (f64, DVector<f64>, DMatrix<f64>) {
        match self {
            PartyWigner::Gaussian(g) => (1.0, g.mean().clone(), g.covariance().clone()),
            PartyWigner::FockSeries { weights, .. } => {
                let mass: f64 = weights.iter().sum();
                let second: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(n, w)| w * (2 * n + 1) as f64)
                    .sum();
                (
                    mass,
                    DVector::zeros(2),
                    DMatrix::identity(2, 2) * (second / mass),
                )
            }
            PartyWigner::Field(f) => f.moments(),
        }
    }

    /// Highest Fock level carrying non-negligible weight.
    fn effective_level(weights: &[f64]) -> usize {
        let scale = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        weights
            .iter()
            .rposition(|w| w.abs() > 1e-14 * scale)
            .unwrap_or(0)
    }

    /// Grid for quadrature against this function: centred on its mean,
    /// `L = 6·max(σ, 1)` for Gaussians, wide enough for the highest
    /// populated level of a Fock series, the native grid for fields.
    pub fn default_grid(&self, points: usize) -> Result<PhaseGrid> {
        match self {
            PartyWigner::Gaussian(g) => {
                let sigma = g
                    .covariance()
                    .diagonal()
                    .iter()
                    .fold(1.0f64, |m, v| m.max(v.sqrt()));
                PhaseGrid::new(g.mean().as_slice().to_vec(), GRID_SIGMAS * sigma, points)
            }
            PartyWigner::FockSeries { weights, .. } => {
                let n = Self::effective_level(weights) as f64;
                PhaseGrid::centered(2, (4.0 * n + 2.0).sqrt() + GRID_SIGMAS, points)
            }
            PartyWigner::Field(f) => Ok(f.grid().clone()),
        }
    }

    pub fn to_field(&self, grid: &PhaseGrid, party: Party) -> Result<WignerField> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: grid.dim(),
            });
        }
        if let PartyWigner::Field(f) = self {
            if f.grid().same_nodes(grid) {
                return Ok(f.clone());
            }
        }
        WignerField::from_fn(grid.clone(), axis_labels(party, self.modes()), |x| self.eval(x))
    }

    /// Reduced single-mode Wigner function of mode `k`.
    pub fn mode_marginal(&self, k: usize) -> Result<PartyWigner> {
        if k >= self.modes() {
            return Err(Error::AxisOutOfRange {
                axis: 2 * k,
                dim: self.dim(),
            });
        }
        match self {
            PartyWigner::Gaussian(g) if self.modes() > 1 => {
                let mean = g.mean().rows(2 * k, 2).into_owned();
                let cov = g.covariance().view((2 * k, 2 * k), (2, 2)).into_owned();
                Ok(PartyWigner::Gaussian(GaussianDensity::new(mean, cov)?))
            }
            PartyWigner::Field(f) if self.modes() > 1 => {
                Ok(PartyWigner::Field(f.marginal(&[2 * k, 2 * k + 1])?))
            }
            _ => Ok(self.clone()),
        }
    }

    fn samples(&self, grid: &PhaseGrid) -> Vec<f64> {
        let d = grid.dim();
        (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; d],
                |x, i| {
                    grid.point_into(i, x);
                    self.eval(x)
                },
            )
            .collect()
    }
}

/// A joint Wigner function `W(x_A⊕x_B)` with Alice's coordinates first.
pub trait JointWigner: Send + Sync {
    fn layout(&self) -> ModeLayout;
    fn joint(&self, x: &[f64]) -> f64;
    fn alice_density(&self, x_a: &[f64]) -> f64;
    fn alice_peak(&self) -> f64;
    fn alice_reduced(&self) -> PartyWigner;
    fn bob_reduced(&self) -> PartyWigner;
    /// Conditional Wigner function at `x_a`, given Alice's (positive)
    /// density `w_a` there.
    fn conditional_at(&self, x_a: &[f64], w_a: f64) -> Result<PartyWigner>;
    fn mean(&self) -> Vec<f64>;
    /// Largest marginal standard deviation, used to size grids.
    fn max_std(&self) -> f64;
}

impl JointWigner for GaussianState {
    fn layout(&self) -> ModeLayout {
        GaussianState::layout(self)
    }

    fn joint(&self, x: &[f64]) -> f64 {
        self.joint_ref().eval(x).unwrap_or(f64::NAN)
    }

    fn alice_density(&self, x_a: &[f64]) -> f64 {
        self.alice_ref().eval_unchecked(x_a)
    }

    fn alice_peak(&self) -> f64 {
        self.alice_ref().peak()
    }

    fn alice_reduced(&self) -> PartyWigner {
        PartyWigner::Gaussian(GaussianState::alice_density(self))
    }

    fn bob_reduced(&self) -> PartyWigner {
        PartyWigner::Gaussian(self.bob_density())
    }

    fn conditional_at(&self, x_a: &[f64], _w_a: f64) -> Result<PartyWigner> {
        let c = conditional_gaussian(self, x_a)?;
        Ok(PartyWigner::Gaussian(GaussianDensity::new(c.mean, c.covariance)?))
    }

    fn mean(&self) -> Vec<f64> {
        GaussianState::mean(self).as_slice().to_vec()
    }

    fn max_std(&self) -> f64 {
        GaussianState::max_std(self)
    }
}

impl JointWigner for FockMixtureState {
    fn layout(&self) -> ModeLayout {
        ModeLayout::single()
    }

    fn joint(&self, x: &[f64]) -> f64 {
        FockMixtureState::joint(self, &x[..2], &x[2..]).unwrap_or(f64::NAN)
    }

    fn alice_density(&self, x_a: &[f64]) -> f64 {
        self.reduced(x_a).unwrap_or(f64::NAN)
    }

    fn alice_peak(&self) -> f64 {
        self.reduced_peak()
    }

    fn alice_reduced(&self) -> PartyWigner {
        PartyWigner::FockSeries {
            weights: self.weights().to_vec(),
            relative_error: 0.0,
        }
    }

    fn bob_reduced(&self) -> PartyWigner {
        self.alice_reduced()
    }

    fn conditional_at(&self, x_a: &[f64], w_a: f64) -> Result<PartyWigner> {
        if x_a.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: x_a.len(),
            });
        }
        let levels = self.levels(x_a[0] * x_a[0] + x_a[1] * x_a[1]);
        let weights = self
            .weights()
            .iter()
            .zip(&levels)
            .map(|(p, w)| p * w / w_a)
            .collect();
        Ok(PartyWigner::FockSeries {
            weights,
            relative_error: self.reduced_truncation_bound() / w_a,
        })
    }

    fn mean(&self) -> Vec<f64> {
        vec![0.0; 4]
    }

    fn max_std(&self) -> f64 {
        self.quadrature_variance().sqrt()
    }
}

/// A joint Wigner function sampled on a grid, with its two marginals.
#[derive(Clone, Debug)]
pub struct GridJoint {
    field: WignerField,
    layout: ModeLayout,
    alice: WignerField,
    bob: WignerField,
}

impl GridJoint {
    pub fn new(field: WignerField, layout: ModeLayout) -> Result<Self> {
        if field.dim() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: field.dim(),
            });
        }
        let a = layout.alice_dim();
        let alice = field.marginal(&(0..a).collect::<Vec<_>>())?;
        let bob = field.marginal(&(a..layout.dim()).collect::<Vec<_>>())?;
        Ok(Self {
            field,
            layout,
            alice,
            bob,
        })
    }

    pub fn field(&self) -> &WignerField {
        &self.field
    }

    pub fn alice_field(&self) -> &WignerField {
        &self.alice
    }

    pub fn bob_field(&self) -> &WignerField {
        &self.bob
    }
}

impl JointWigner for GridJoint {
    fn layout(&self) -> ModeLayout {
        self.layout
    }

    fn joint(&self, x: &[f64]) -> f64 {
        self.field.interpolate(x)
    }

    fn alice_density(&self, x_a: &[f64]) -> f64 {
        self.alice.interpolate(x_a)
    }

    fn alice_peak(&self) -> f64 {
        self.alice.max_value()
    }

    fn alice_reduced(&self) -> PartyWigner {
        PartyWigner::Field(self.alice.clone())
    }

    fn bob_reduced(&self) -> PartyWigner {
        PartyWigner::Field(self.bob.clone())
    }

    fn conditional_at(&self, x_a: &[f64], w_a: f64) -> Result<PartyWigner> {
        let a = self.layout.alice_dim();
        let bob_grid = self.bob.grid().clone();
        let mut x = vec![0.0; self.layout.dim()];
        x[..a].copy_from_slice(x_a);
        let values: Vec<f64> = (0..bob_grid.len())
            .into_par_iter()
            .map_init(
                || x.clone(),
                |x, i| {
                    bob_grid.point_into(i, &mut x[a..]);
                    self.field.interpolate(x) / w_a
                },
            )
            .collect();
        Ok(PartyWigner::Field(WignerField::new(
            bob_grid,
            self.bob.axes().to_vec(),
            values,
        )?))
    }

    fn mean(&self) -> Vec<f64> {
        self.field.moments().1.as_slice().to_vec()
    }

    fn max_std(&self) -> f64 {
        self.field.moments().2.diagonal().iter().fold(0.0f64, |m, v| m.max(v.sqrt()))
    }
}

/// The joint states the toolkit works with.
#[derive(Clone, Debug)]
pub enum JointState {
    Gaussian(GaussianState),
    FockMixture(FockMixtureState),
    NumericGrid(GridJoint),
}

impl JointState {
    pub fn as_joint(&self) -> &dyn JointWigner {
        match self {
            JointState::Gaussian(s) => s,
            JointState::FockMixture(s) => s,
            JointState::NumericGrid(s) => s,
        }
    }
}

impl From<GaussianState> for JointState {
    fn from(s: GaussianState) -> Self {
        JointState::Gaussian(s)
    }
}

impl From<FockMixtureState> for JointState {
    fn from(s: FockMixtureState) -> Self {
        JointState::FockMixture(s)
    }
}

impl From<GridJoint> for JointState {
    fn from(s: GridJoint) -> Self {
        JointState::NumericGrid(s)
    }
}

impl JointWigner for JointState {
    fn layout(&self) -> ModeLayout {
        self.as_joint().layout()
    }
    fn joint(&self, x: &[f64]) -> f64 {
        self.as_joint().joint(x)
    }
    fn alice_density(&self, x_a: &[f64]) -> f64 {
        self.as_joint().alice_density(x_a)
    }
    fn alice_peak(&self) -> f64 {
        self.as_joint().alice_peak()
    }
    fn alice_reduced(&self) -> PartyWigner {
        self.as_joint().alice_reduced()
    }
    fn bob_reduced(&self) -> PartyWigner {
        self.as_joint().bob_reduced()
    }
    fn conditional_at(&self, x_a: &[f64], w_a: f64) -> Result<PartyWigner> {
        self.as_joint().conditional_at(x_a, w_a)
    }
    fn mean(&self) -> Vec<f64> {
        self.as_joint().mean()
    }
    fn max_std(&self) -> f64 {
        self.as_joint().max_std()
    }
}

/// `W(x_B|x_A)`; refuses points where Alice's density is below
/// [`POSITIVITY_FLOOR`] times its peak.
pub fn conditional_wigner(joint: &dyn JointWigner, x_a: &[f64]) -> Result<PartyWigner> {
    let a = joint.layout().alice_dim();
    if x_a.len() != a {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: x_a.len(),
        });
    }
    let w_a = joint.alice_density(x_a);
    let floor = POSITIVITY_FLOOR * joint.alice_peak();
    if !(w_a > floor) {
        return Err(Error::ConditioningUnsupported { value: w_a, floor });
    }
    joint.conditional_at(x_a, w_a)
}

/// Positive operators on Bob's modes used to test physicality. An empty
/// displacement means no displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessOperator {
    /// `D(ξ)|m⟩⟨m|D(ξ)†` on one mode, identity on the rest.
    FockProjector {
        level: usize,
        #[serde(default)]
        mode: usize,
        #[serde(default)]
        displacement: Vec<f64>,
    },
    /// `D(ξ) n̂(f) D(ξ)†`, the number operator of the mode along unit axis `f`.
    DisplacedNumber {
        axis: Vec<f64>,
        #[serde(default)]
        displacement: Vec<f64>,
    },
    /// `D(ξ) U n̂_k U† D(ξ)†` with `U` the Gaussian unitary of symplectic `S`.
    SqueezedNumber {
        symplectic: Vec<Vec<f64>>,
        mode: usize,
        #[serde(default)]
        displacement: Vec<f64>,
    },
}

impl WitnessOperator {
    pub fn fock(level: usize) -> Self {
        WitnessOperator::FockProjector {
            level,
            mode: 0,
            displacement: Vec::new(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            WitnessOperator::FockProjector { .. } => "fock-projector",
            WitnessOperator::DisplacedNumber { .. } => "displaced-number",
            WitnessOperator::SqueezedNumber { .. } => "squeezed-number",
        }
    }

    fn displacement(&self) -> &[f64] {
        match self {
            WitnessOperator::FockProjector { displacement, .. }
            | WitnessOperator::DisplacedNumber { displacement, .. }
            | WitnessOperator::SqueezedNumber { displacement, .. } => displacement,
        }
    }

    fn displacement_or_zero(&self, dim: usize) -> Vec<f64> {
        let d = self.displacement();
        if d.is_empty() {
            vec![0.0; dim]
        } else {
            d.to_vec()
        }
    }

    fn check(&self, modes: usize) -> Result<()> {
        let dim = 2 * modes;
        let d = self.displacement();
        if !d.is_empty() && d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
        match self {
            WitnessOperator::FockProjector { mode, .. } if *mode >= modes => {
                Err(Error::AxisOutOfRange {
                    axis: 2 * mode,
                    dim,
                })
            }
            WitnessOperator::DisplacedNumber { axis, .. } => {
                if axis.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: axis.len(),
                    });
                }
                if axis.iter().all(|c| *c == 0.0) {
                    return Err(Error::ZeroVector);
                }
                Ok(())
            }
            WitnessOperator::SqueezedNumber {
                symplectic, mode, ..
            } => {
                if symplectic.len() != dim || symplectic.iter().any(|r| r.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: symplectic.len(),
                    });
                }
                if *mode >= modes {
                    return Err(Error::AxisOutOfRange {
                        axis: 2 * mode,
                        dim,
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn unit_axis(axis: &[f64]) -> Vec<f64> {
        let n = axis.iter().map(|c| c * c).sum::<f64>().sqrt();
        axis.iter().map(|c| c / n).collect()
    }

    fn inverse_symplectic(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = rows.len();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
            .try_inverse()
            .ok_or(Error::Singular("witness symplectic matrix"))
    }

    /// Wigner function over `modes` Bob modes.
    pub fn wigner(&self, x: &[f64], modes: usize) -> Result<f64> {
        self.check(modes)?;
        if x.len() != 2 * modes {
            return Err(Error::DimensionMismatch {
                expected: 2 * modes,
                got: x.len(),
            });
        }
        let d = self.displacement_or_zero(2 * modes);
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
        let norm = 4.0 * FOUR_PI.powi(modes as i32);
        Ok(match self {
            WitnessOperator::FockProjector { level, mode, .. } => {
                let (a, b) = (y[2 * mode], y[2 * mode + 1]);
                fock_wigner_radial(*level, a * a + b * b) / FOUR_PI.powi(modes as i32 - 1)
            }
            WitnessOperator::DisplacedNumber { axis, .. } => {
                let f = Self::unit_axis(axis);
                let g = omega_apply(&f);
                let q: f64 = f.iter().zip(&y).map(|(a, b)| a * b).sum();
                let p: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
                (q * q + p * p - 2.0) / norm
            }
            WitnessOperator::SqueezedNumber {
                symplectic, mode, ..
            } => {
                let t = Self::inverse_symplectic(symplectic)?;
                let z = t * DVector::from_vec(y);
                let (a, b) = (z[2 * mode], z[2 * mode + 1]);
                (a * a + b * b - 2.0) / norm
            }
        })
    }

    /// Closed-form expectation of a quadratic witness from the moments of
    /// the Wigner function it is paired with, and the magnitude of the terms
    /// that cancel in it (for a roundoff bound).
    fn quadratic_value(
        &self,
        mass: f64,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
    ) -> Result<Option<(f64, f64)>> {
        let n = mean.len();
        let d = DVector::from_vec(self.displacement_or_zero(n));
        let delta = mean - d;
        Ok(match self {
            WitnessOperator::FockProjector { .. } => None,
            WitnessOperator::DisplacedNumber { axis, .. } => {
                let second = cov + &delta * delta.transpose();
                let f = DVector::from_vec(Self::unit_axis(axis));
                let g = DVector::from_vec(omega_apply(f.as_slice()));
                let q = (f.transpose() * &second * &f)[(0, 0)];
                let p = (g.transpose() * &second * &g)[(0, 0)];
                Some((0.25 * mass * (q + p - 2.0), 0.25 * mass.abs() * (q.abs() + p.abs() + 2.0)))
            }
            WitnessOperator::SqueezedNumber {
                symplectic, mode, ..
            } => {
                let t = Self::inverse_symplectic(symplectic)?;
                let m = &t * delta;
                let c = &t * cov * t.transpose();
                let (a, b) = (2 * mode, 2 * mode + 1);
                let second = c[(a, a)] + c[(b, b)] + m[a] * m[a] + m[b] * m[b];
                Some((0.25 * mass * (second - 2.0), 0.25 * mass.abs() * (second.abs() + 2.0)))
            }
        })
    }
}

/// A witness together with its expectation and quadrature error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvaluation {
    pub witness: WitnessOperator,
    pub value: f64,
    pub error_bound: f64,
}

/// Which witness families to search and how finely to integrate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessConfig {
    pub families: Vec<String>,
    pub max_fock: usize,
    pub quadrature_points: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            families: WITNESS_FAMILIES.iter().map(|s| s.to_string()).collect(),
            max_fock: DEFAULT_MAX_FOCK,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
        }
    }
}

impl WitnessConfig {
    pub fn fock_only(max_fock: usize) -> Self {
        Self {
            families: vec!["fock-projector".into()],
            max_fock,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParameter("no witness families selected".into()));
        }
        for name in &self.families {
            witness_family(name)?;
        }
        PhaseGrid::centered(2, 1.0, self.quadrature_points)?;
        Ok(())
    }
}

/// A strategy producing and evaluating candidate witnesses for a
/// conditional Wigner function.
pub trait WitnessFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, cond: &PartyWigner, config: &WitnessConfig) -> Result<Vec<WitnessEvaluation>>;
}

pub const WITNESS_FAMILIES: [&str; 3] = ["fock-projector", "displaced-number", "squeezed-number"];

/// Looks up a registered witness family by name.
pub fn witness_family(name: &str) -> Result<Box<dyn WitnessFamily>> {
    match name {
        "fock-projector" => Ok(Box::new(FockProjectorFamily)),
        "displaced-number" => Ok(Box::new(DisplacedNumberFamily)),
        "squeezed-number" => Ok(Box::new(SqueezedNumberFamily)),
        other => Err(Error::InvalidParameter(format!(
            "unknown witness family {other:?}; known: {}",
            WITNESS_FAMILIES.join(", ")
        ))),
    }
}

/// `|m⟩⟨m|` for `m ≤ max_fock` on every mode, undisplaced and displaced to
/// the conditional mean.
struct FockProjectorFamily;

/// Number operators along the eigen-axes of `V + ΩᵀVΩ`, displaced to the
/// conditional mean.
struct DisplacedNumberFamily;

/// Number operators in the Williamson frame of the conditional covariance,
/// displaced to the conditional mean. For a Gaussian the value is
/// `(ν_k − 1)/2`, negative exactly when the uncertainty relation fails.
struct SqueezedNumberFamily;

impl WitnessFamily for FockProjectorFamily {
    fn name(&self) -> &'static str {
        "fock-projector"
    }

    fn evaluate(&self, cond: &PartyWigner, config: &WitnessConfig) -> Result<Vec<WitnessEvaluation>> {
        let modes = cond.modes();
        let (_, mean, _) = cond.moments();
        let mut out = Vec::new();
        for k in 0..modes {
            let mk = [mean[2 * k], mean[2 * k + 1]];
            let mut shifts = vec![[0.0, 0.0]];
            if mk[0].hypot(mk[1]) > 1e-12 {
                shifts.push(mk);
            }
            for shift in shifts {
                let mut displacement = Vec::new();
                if shift != [0.0, 0.0] {
                    displacement = vec![0.0; 2 * modes];
                    displacement[2 * k] = shift[0];
                    displacement[2 * k + 1] = shift[1];
                }
                let values = fock_projector_values(cond, k, shift, config.max_fock, config, true)?;
                out.extend(values.into_iter().enumerate().map(|(level, (value, error_bound))| {
                    WitnessEvaluation {
                        witness: WitnessOperator::FockProjector {
                            level,
                            mode: k,
                            displacement: displacement.clone(),
                        },
                        value,
                        error_bound,
                    }
                }));
            }
        }
        Ok(out)
    }
}

impl WitnessFamily for DisplacedNumberFamily {
    fn name(&self) -> &'static str {
        "displaced-number"
    }

    fn evaluate(&self, cond: &PartyWigner, config: &WitnessConfig) -> Result<Vec<WitnessEvaluation>> {
        let (_, mean, cov) = cond.moments();
        let eig = number_witness_matrix(&cov)?.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
        order
            .into_iter()
            .map(|i| {
                let mut axis: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                if let Some(&first) = axis.iter().find(|c| c.abs() > 1e-12) {
                    if first < 0.0 {
                        axis.iter_mut().for_each(|c| *c = -*c);
                    }
                }
                let op = WitnessOperator::DisplacedNumber {
                    axis,
                    displacement: mean.as_slice().to_vec(),
                };
                evaluate_with(cond, op, config, true)
            })
            .collect()
    }
}

impl WitnessFamily for SqueezedNumberFamily {
    fn name(&self) -> &'static str {
        "squeezed-number"
    }

    fn evaluate(&self, cond: &PartyWigner, config: &WitnessConfig) -> Result<Vec<WitnessEvaluation>> {
        let (_, mean, cov) = cond.moments();
        // Without a positive definite covariance there is no Williamson frame.
        let Ok(w) = williamson(&cov) else {
            return Ok(Vec::new());
        };
        let rows: Vec<Vec<f64>> = w
            .symplectic
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        (0..cond.modes())
            .map(|mode| {
                let op = WitnessOperator::SqueezedNumber {
                    symplectic: rows.clone(),
                    mode,
                    displacement: mean.as_slice().to_vec(),
                };
                evaluate_with(cond, op, config, true)
            })
            .collect()
    }
}

/// `Σ_i W(x_i)·levels(x_i)·4π h²` for every Fock level at once, with the
/// matching L1 norms. Rows are reduced in order, so the result does not
/// depend on the thread count.
fn fock_level_sums(grid: &PhaseGrid, density: &[f64], shift: [f64; 2], max: usize) -> (Vec<f64>, Vec<f64>) {
    let n = grid.points_per_axis();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = vec![0.0; max + 1];
            let mut a = vec![0.0; max + 1];
            let q = grid.coord(0, i) - shift[0];
            for j in 0..n {
                let rho = density[i * n + j];
                if rho == 0.0 {
                    continue;
                }
                let p = grid.coord(1, j) - shift[1];
                for (m, w) in fock_wigner_levels(max, q * q + p * p).into_iter().enumerate() {
                    s[m] += rho * w;
                    a[m] += (rho * w).abs();
                }
            }
            (s, a)
        })
        .collect();
    let scale = FOUR_PI * grid.cell_volume();
    let mut sums = vec![0.0; max + 1];
    let mut l1 = vec![0.0; max + 1];
    for (s, a) in rows {
        for m in 0..=max {
            sums[m] += s[m];
            l1[m] += a[m];
        }
    }
    (
        sums.into_iter().map(|v| v * scale).collect(),
        l1.into_iter().map(|v| v * scale).collect(),
    )
}

/// `(value, error bound)` of `D(shift)|m⟩⟨m|D(shift)†` on mode `k` for
/// `m = 0..=max`.
fn fock_projector_values(
    cond: &PartyWigner,
    k: usize,
    shift: [f64; 2],
    max: usize,
    config: &WitnessConfig,
    with_bound: bool,
) -> Result<Vec<(f64, f64)>> {
    if let PartyWigner::FockSeries {
        weights,
        relative_error,
    } = cond
    {
        if shift == [0.0, 0.0] {
            let rel = if *relative_error < 1.0 {
                relative_error / (1.0 - relative_error)
            } else {
                f64::INFINITY
            };
            return Ok((0..=max)
                .map(|m| {
                    let w = weights.get(m).copied().unwrap_or(0.0);
                    (w, w.abs() * (rel + ROUNDOFF))
                })
                .collect());
        }
    }
    let marginal = cond.mode_marginal(k)?;
    let grid = marginal.default_grid(config.quadrature_points)?;
    let density = match &marginal {
        PartyWigner::Field(f) => f.values().to_vec(),
        _ => marginal.samples(&grid),
    };
    let (values, l1) = fock_level_sums(&grid, &density, shift, max);
    if !with_bound {
        return Ok(values.into_iter().map(|v| (v, 0.0)).collect());
    }
    let partner = grid.refinement_partner();
    let (coarse, _) = fock_level_sums(&partner, &marginal.samples(&partner), shift, max);
    // |W_m| ≤ 1/2π, so the part of the integral outside the box is at most
    // 4π/2π times the mass the density puts there.
    let truncation = 2.0 * outside_mass(&marginal, &grid);
    Ok(values
        .iter()
        .zip(&coarse)
        .zip(&l1)
        .map(|((v, c), a)| {
            (*v, REFINEMENT_SAFETY * (v - c).abs() + ROUNDOFF * a + truncation)
        })
        .collect())
}

/// Upper bound on the mass of a Gaussian outside the cells of `grid`; zero
/// for anything else (a sampled field has no mass off its grid).
fn outside_mass(w: &PartyWigner, grid: &PhaseGrid) -> f64 {
    let PartyWigner::Gaussian(g) = w else {
        return 0.0;
    };
    let h = grid.step();
    (0..grid.dim())
        .map(|i| {
            let sigma = g.covariance()[(i, i)].sqrt();
            let reach = grid.half_width() - h / 2.0 - (g.mean()[i] - grid.center()[i]).abs();
            if reach <= 0.0 {
                1.0
            } else {
                libm::erfc(reach / (sigma * std::f64::consts::SQRT_2))
            }
        })
        .sum::<f64>()
        .min(1.0)
}

fn field_pairing(cond: &PartyWigner, op: &WitnessOperator, grid: &PhaseGrid) -> Result<(f64, f64)> {
    let modes = cond.modes();
    let d = grid.dim();
    let terms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |x, i| {
                grid.point_into(i, x);
                let w = cond.eval(x);
                if w == 0.0 {
                    0.0
                } else {
                    w * op.wigner(x, modes).unwrap_or(f64::NAN)
                }
            },
        )
        .collect();
    let scale = FOUR_PI.powi(modes as i32) * grid.cell_volume();
    let value: f64 = terms.iter().sum::<f64>() * scale;
    let l1: f64 = terms.iter().map(|t| t.abs()).sum::<f64>() * scale;
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((value, l1))
}

fn evaluate_with(
    cond: &PartyWigner,
    op: WitnessOperator,
    config: &WitnessConfig,
    with_bound: bool,
) -> Result<WitnessEvaluation> {
    let modes = cond.modes();
    op.check(modes)?;
    if let WitnessOperator::FockProjector {
        level, mode, ..
    } = &op
    {
        let d = op.displacement_or_zero(2 * modes);
        let shift = [d[2 * mode], d[2 * mode + 1]];
        let (value, error_bound) =
            fock_projector_values(cond, *mode, shift, *level, config, with_bound)?[*level];
        return Ok(WitnessEvaluation {
            witness: op,
            value,
            error_bound,
        });
    }
    if !matches!(cond, PartyWigner::Field(_)) {
        let (mass, mean, cov) = cond.moments();
        if let Some((value, scale)) = op.quadratic_value(mass, &mean, &cov)? {
            return Ok(WitnessEvaluation {
                witness: op,
                value,
                error_bound: ROUNDOFF * scale,
            });
        }
    }
    let grid = cond.default_grid(config.quadrature_points)?;
    let (value, l1) = field_pairing(cond, &op, &grid)?;
    let error_bound = if with_bound {
        let (coarse, _) = field_pairing(cond, &op, &grid.refinement_partner())?;
        REFINEMENT_SAFETY * (value - coarse).abs() + ROUNDOFF * l1
    } else {
        0.0
    };
    Ok(WitnessEvaluation {
        witness: op,
        value,
        error_bound,
    })
}

/// `(4π)^{l'} ∫ W_P(x_B) W(x_B|x_A) dx_B`, in closed form where possible and
/// by quadrature otherwise.
pub fn witness_expectation(
    cond: &PartyWigner,
    witness: &WitnessOperator,
    config: &WitnessConfig,
) -> Result<WitnessEvaluation> {
    evaluate_with(cond, witness.clone(), config, true)
}

/// A witness whose expectation under `W(x_B|x_A)` is negative beyond its
/// quadrature error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityCertificate {
    pub x_a: Vec<f64>,
    pub witness: WitnessOperator,
    pub value: f64,
    pub error_bound: f64,
}

/// Searches the configured witness families for the most negative robust
/// violation (`value + error_bound < 0`). `None` means no violation was
/// found, not that the conditional state is physical.
pub fn certify_unphysical(
    joint: &dyn JointWigner,
    x_a: &[f64],
    config: &WitnessConfig,
) -> Result<Option<PhysicalityCertificate>> {
    let cond = conditional_wigner(joint, x_a)?;
    certify_conditional(&cond, x_a, config)
}

fn certify_conditional(
    cond: &PartyWigner,
    x_a: &[f64],
    config: &WitnessConfig,
) -> Result<Option<PhysicalityCertificate>> {
    let mut best: Option<WitnessEvaluation> = None;
    for name in &config.families {
        for e in witness_family(name)?.evaluate(cond, config)? {
            if e.value + e.error_bound < 0.0 && best.as_ref().map_or(true, |b| e.value < b.value) {
                best = Some(e);
            }
        }
    }
    Ok(best.map(|e| PhysicalityCertificate {
        x_a: x_a.to_vec(),
        witness: e.witness,
        value: e.value,
        error_bound: e.error_bound,
    }))
}

/// Result of certifying one conditioning point.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ScanOutcome {
    Certified { certificate: PhysicalityCertificate },
    NoViolationFound,
    Unsupported { alice_density: f64, floor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanEntry {
    pub x_a: Vec<f64>,
    #[serde(flatten)]
    pub outcome: ScanOutcome,
}

/// [`certify_unphysical`] at every point, in parallel, results in input order.
pub fn certify_scan(
    joint: &dyn JointWigner,
    points: &[Vec<f64>],
    config: &WitnessConfig,
) -> Result<Vec<ScanEntry>> {
    config.validate()?;
    points
        .par_iter()
        .map(|x| {
            let outcome = match conditional_wigner(joint, x) {
                Ok(cond) => match certify_conditional(&cond, x, config)? {
                    Some(certificate) => ScanOutcome::Certified { certificate },
                    None => ScanOutcome::NoViolationFound,
                },
                Err(Error::ConditioningUnsupported { value, floor }) => ScanOutcome::Unsupported {
                    alice_density: value,
                    floor,
                },
                Err(e) => return Err(e),
            };
            Ok(ScanEntry {
                x_a: x.clone(),
                outcome,
            })
        })
        .collect()
}

/// `⟨P̂_b⟩_{B|x_A}`: the expectation of Bob's outcome operator under the
/// conditional Wigner function. It may be negative.
pub fn conditional_quasi_probability(
    joint: &dyn JointWigner,
    p_b: &WitnessOperator,
    x_a: &[f64],
    config: &WitnessConfig,
) -> Result<f64> {
    let cond = conditional_wigner(joint, x_a)?;
    Ok(evaluate_with(&cond, p_b.clone(), config, false)?.value)
}

/// Alice's state after Bob obtains the outcome `P̂_b`.
#[derive(Clone, Debug)]
pub struct RemoteState {
    pub alice: WignerField,
    pub success_probability: f64,
    pub herald: WitnessOperator,
}

/// Default grid for Alice's heralded state: centred on her mean,
/// `L = 6·max(σ_A, 1)`, or her native grid for sampled joints.
pub fn default_alice_grid(joint: &dyn JointWigner, points: usize) -> Result<PhaseGrid> {
    match joint.alice_reduced() {
        PartyWigner::Field(f) => Ok(f.grid().clone()),
        reduced => {
            let (_, mean, cov) = reduced.moments();
            let sigma = cov.diagonal().iter().fold(1.0f64, |m, v| m.max(v.sqrt()));
            PhaseGrid::new(mean.as_slice().to_vec(), GRID_SIGMAS * sigma, points)
        }
    }
}

/// Bayes rule for Wigner functions:
/// `W_{A|b}(x_A) = ⟨P̂_b⟩_{B|x_A} W_A(x_A) / ⟨P̂_b⟩`, sampled on `alice_grid`.
/// The success probability `⟨P̂_b⟩` is computed separately from Bob's
/// reduced state.
pub fn remote_conditioned_state(
    joint: &dyn JointWigner,
    p_b: &WitnessOperator,
    alice_grid: &PhaseGrid,
    config: &WitnessConfig,
) -> Result<RemoteState> {
    let layout = joint.layout();
    if alice_grid.dim() != layout.alice_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.alice_dim(),
            got: alice_grid.dim(),
        });
    }
    let success = evaluate_with(&joint.bob_reduced(), p_b.clone(), config, false)?.value;
    if !(success > PROBABILITY_FLOOR) {
        return Err(Error::HeraldImpossible(success));
    }
    let values: Vec<f64> = (0..alice_grid.len())
        .into_par_iter()
        .map(|i| {
            let x = alice_grid.point(i);
            let w_a = joint.alice_density(&x);
            if !(w_a > 0.0) {
                return Ok(0.0);
            }
            let cond = joint.conditional_at(&x, w_a)?;
            let q = evaluate_with(&cond, p_b.clone(), config, false)?.value;
            Ok(w_a * q / success)
        })
        .collect::<Result<_>>()?;
    let alice = WignerField::new(
        alice_grid.clone(),
        axis_labels(Party::Alice, layout.alice_modes()),
        values,
    )?;
    Ok(RemoteState {
        alice,
        success_probability: success,
        herald: p_b.clone(),
    })
}

/// Where and how much a sampled Wigner function goes negative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NegativitySummary {
    pub min_value: f64,
    pub min_location: PhaseSpacePoint,
    pub negative_volume: f64,
    pub integral: f64,
}

pub fn negativity_summary(field: &WignerField) -> NegativitySummary {
    let (min_value, min_location) = field.min_value();
    NegativitySummary {
        min_value,
        min_location,
        negative_volume: field.negative_volume(),
        integral: field.integrate(),
    }
}

/// `-1/2π`, the minimum of the one-photon Wigner function.
pub const ONE_PHOTON_MIN: f64 = -1.0 / (2.0 * PI);
