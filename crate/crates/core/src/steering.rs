//! Homodyne steering statistics (Reid's product), the averaged variance of the
//! conditional Wigner function, and assemblages built from Wigner-positive
//! measurements.
//!
//! Homodyne statistics need one mode per party. Along Alice's axis `g` and
//! Bob's axis `f` the joint Wigner function is tabulated in rotated
//! coordinates `x_A = q_A g + p_A Ωᵀg`, `x_B = q_B f + p_B Ωᵀf`. Every
//! variance below is a sum over that one table, so the Jensen step
//! `Var[q̂_B|q̂_A] ≥ Var_c[q_B]` holds exactly for the discrete sums.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{JointWigner, POSITIVITY_FLOOR};
use crate::error::{Error, Result};
use crate::measurements::{assert_positive_on, PovmFamily};
use crate::phase_space::{axis_labels, omega_t_apply, Party, PhaseGrid, WignerField, FOUR_PI};

/// Slack allowed in `Var[q̂_B|q̂_A] ≥ Var_c[q_B]`.
pub const CHAIN_TOLERANCE: f64 = 1e-4;
/// Reid's product must fall below `1 − REID_TOLERANCE` to flag steering.
pub const REID_TOLERANCE: f64 = 1e-6;
/// Columns of the outer `q_A` integral with `P(q_A)` below this fraction of
/// the peak are dropped.
pub const SLICE_FLOOR: f64 = 1e-10;
/// The variance-product witness is searched only where `W_A` exceeds this
/// fraction of its peak, away from the box edges where Bob's slices are
/// clipped.
pub const WITNESS_FLOOR: f64 = 1e-6;
pub const DEFAULT_STEERING_POINTS: usize = 48;
const GRID_SIGMAS: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Q,
    P,
}

/// A unit direction in one party's single-mode phase space. The `q̂`
/// quadrature is measured along `direction`, `p̂` along `Ωᵀ·direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAxis {
    pub party: Party,
    direction: [f64; 2],
}

impl QuadratureAxis {
    pub fn new(party: Party, direction: &[f64]) -> Result<Self> {
        if direction.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: direction.len(),
            });
        }
        let norm = direction[0].hypot(direction[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            party,
            direction: [direction[0] / norm, direction[1] / norm],
        })
    }

    /// The bare `q` axis of the party's mode.
    pub fn standard(party: Party) -> Self {
        Self {
            party,
            direction: [1.0, 0.0],
        }
    }

    pub fn q_direction(&self) -> [f64; 2] {
        self.direction
    }

    pub fn p_direction(&self) -> [f64; 2] {
        let v = omega_t_apply(&self.direction);
        [v[0], v[1]]
    }

    /// `q·d + p·Ωᵀd`.
    pub fn point(&self, q: f64, p: f64) -> [f64; 2] {
        let [a, b] = self.direction;
        [q * a - p * b, q * b + p * a]
    }

    /// Inverse of [`Self::point`].
    pub fn coordinates(&self, x: &[f64]) -> (f64, f64) {
        let [a, b] = self.direction;
        (a * x[0] + b * x[1], -b * x[0] + a * x[1])
    }
}

/// Resolution of the homodyne table: `points` nodes per rotated axis over
/// `±half_width` around the joint mean (default: 8 × the largest marginal
/// standard deviation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringGrid {
    pub points: usize,
    pub half_width: Option<f64>,
}

impl Default for SteeringGrid {
    fn default() -> Self {
        Self {
            points: DEFAULT_STEERING_POINTS,
            half_width: None,
        }
    }
}

fn check_single_modes(joint: &dyn JointWigner) -> Result<()> {
    let layout = joint.layout();
    if layout.alice_modes() != 1 || layout.bob_modes() != 1 {
        return Err(Error::Unsupported(
            "homodyne statistics are implemented for one mode per party".into(),
        ));
    }
    Ok(())
}

fn check_axes(g: &QuadratureAxis, f: &QuadratureAxis) -> Result<()> {
    if g.party != Party::Alice || f.party != Party::Bob {
        return Err(Error::InvalidParameter(
            "expected an Alice axis followed by a Bob axis".into(),
        ));
    }
    Ok(())
}

/// The joint Wigner function tabulated in rotated coordinates
/// `(q_A, p_A, q_B, p_B)`, last index fastest.
#[derive(Clone, Debug)]
pub struct HomodyneTable {
    g: QuadratureAxis,
    f: QuadratureAxis,
    center: [f64; 4],
    half_width: f64,
    n: usize,
    values: Vec<f64>,
}

impl HomodyneTable {
    pub fn new(
        joint: &dyn JointWigner,
        g: &QuadratureAxis,
        f: &QuadratureAxis,
        grid: &SteeringGrid,
    ) -> Result<Self> {
        check_single_modes(joint)?;
        check_axes(g, f)?;
        let n = grid.points;
        let half_width = grid
            .half_width
            .unwrap_or_else(|| GRID_SIGMAS * joint.max_std().max(1.0));
        // Validates N and L.
        PhaseGrid::centered(4, half_width, n)?;
        let mean = joint.mean();
        let (qa, pa) = g.coordinates(&mean[..2]);
        let (qb, pb) = f.coordinates(&mean[2..]);
        let center = [qa, pa, qb, pb];
        let h = 2.0 * half_width / n as f64;
        let coord = |axis: usize, i: usize| center[axis] - half_width + i as f64 * h;
        let rows: Vec<Vec<f64>> = (0..n * n)
            .into_par_iter()
            .map(|ij| {
                let x_a = g.point(coord(0, ij / n), coord(1, ij % n));
                let mut x = [x_a[0], x_a[1], 0.0, 0.0];
                let mut out = Vec::with_capacity(n * n);
                for k in 0..n {
                    for l in 0..n {
                        let x_b = f.point(coord(2, k), coord(3, l));
                        x[2] = x_b[0];
                        x[3] = x_b[1];
                        out.push(joint.joint(&x));
                    }
                }
                out
            })
            .collect();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            g: *g,
            f: *f,
            center,
            half_width,
            n,
            values,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + i as f64 * self.step()
    }

    fn at(&self, ia: usize, ja: usize, ib: usize, jb: usize) -> f64 {
        let n = self.n;
        self.values[((ia * n + ja) * n + ib) * n + jb]
    }

    fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step().powi(4)
    }

    /// `P(a, b)` for the chosen quadrature pair: rows index Alice's value,
    /// columns Bob's.
    fn pair_marginal(&self, which: Quadrature) -> Vec<Vec<f64>> {
        let n = self.n;
        let h2 = self.step().powi(2);
        let mut m = vec![vec![0.0; n]; n];
        for ia in 0..n {
            for ja in 0..n {
                for ib in 0..n {
                    for jb in 0..n {
                        let v = self.at(ia, ja, ib, jb);
                        match which {
                            Quadrature::Q => m[ia][ib] += v,
                            Quadrature::P => m[ja][jb] += v,
                        }
                    }
                }
            }
        }
        m.iter_mut().flatten().for_each(|v| *v *= h2);
        m
    }

    /// `∫P(a)Var[b|a]da` over the table, dropping slices below
    /// [`SLICE_FLOOR`]; also returns the dropped probability.
    pub fn conditional_variance(&self, which: Quadrature) -> (f64, f64) {
        let h = self.step();
        let axis_b = match which {
            Quadrature::Q => 2,
            Quadrature::P => 3,
        };
        let m = self.pair_marginal(which);
        let masses: Vec<f64> = m.iter().map(|row| row.iter().sum::<f64>() * h).collect();
        let peak = masses.iter().fold(0.0f64, |a, b| a.max(*b));
        let mut var = 0.0;
        let mut dropped = 0.0;
        for (row, &m0) in m.iter().zip(&masses) {
            if !(m0 > SLICE_FLOOR * peak) {
                dropped += m0.abs();
                continue;
            }
            let (mut m1, mut m2) = (0.0, 0.0);
            for (k, p) in row.iter().enumerate() {
                let b = self.coord(axis_b, k);
                m1 += p * b * h;
                m2 += p * b * b * h;
            }
            var += (m2 - m1 * m1 / m0) * h;
        }
        (var / self.total_mass(), dropped)
    }

    /// For every Alice node: `(x_A, W_A h², Var[q_B|x_A], Var[p_B|x_A])`.
    fn wigner_slices(&self) -> Vec<([f64; 2], f64, f64, f64)> {
        let n = self.n;
        let h2 = self.step().powi(2);
        let mut out = Vec::with_capacity(n * n);
        for ia in 0..n {
            for ja in 0..n {
                let mut s = [0.0; 5];
                for ib in 0..n {
                    let qb = self.coord(2, ib);
                    for jb in 0..n {
                        let pb = self.coord(3, jb);
                        let v = self.at(ia, ja, ib, jb);
                        s[0] += v;
                        s[1] += v * qb;
                        s[2] += v * qb * qb;
                        s[3] += v * pb;
                        s[4] += v * pb * pb;
                    }
                }
                let m0 = s[0] * h2 * h2;
                let vq = (s[2] / s[0]) - (s[1] / s[0]).powi(2);
                let vp = (s[4] / s[0]) - (s[3] / s[0]).powi(2);
                let x_a = self.g.point(self.coord(0, ia), self.coord(1, ja));
                out.push((x_a, m0, vq, vp));
            }
        }
        out
    }

    /// `Var_c = ∫W_A(x_A) Var[b|x_A] dx_A` over nodes above the conditioning
    /// floor.
    pub fn averaged_wigner_variance(&self, which: Quadrature) -> f64 {
        let slices = self.wigner_slices();
        let peak = slices.iter().fold(0.0f64, |a, s| a.max(s.1));
        let total = self.total_mass();
        slices
            .iter()
            .filter(|s| s.1 > POSITIVITY_FLOOR * peak)
            .map(|(_, m0, vq, vp)| {
                m0 * match which {
                    Quadrature::Q => vq,
                    Quadrature::P => vp,
                }
            })
            .sum::<f64>()
            / total
    }

    /// Smallest `Var[q_B|x_A]·Var[p_B|x_A]` over nodes with positive
    /// variances, and the most probable node where the product is below 1.
    /// Only nodes within [`WITNESS_FLOOR`] are considered.
    pub fn variance_product_witness(&self) -> (Option<f64>, Option<([f64; 2], f64)>) {
        let slices = self.wigner_slices();
        let peak = slices.iter().fold(0.0f64, |a, s| a.max(s.1));
        let mut min: Option<f64> = None;
        let mut best: Option<([f64; 2], f64, f64)> = None;
        for (x, m0, vq, vp) in &slices {
            if !(*m0 > WITNESS_FLOOR * peak && *vq > 0.0 && *vp > 0.0) {
                continue;
            }
            let product = vq * vp;
            min = Some(min.map_or(product, |m| m.min(product)));
            if product < 1.0 && best.map_or(true, |b| *m0 > b.2) {
                best = Some((*x, product, *m0));
            }
        }
        (min, best.map(|b| (b.0, b.1)))
    }

    pub fn alice_axis(&self) -> &QuadratureAxis {
        &self.g
    }

    pub fn bob_axis(&self) -> &QuadratureAxis {
        &self.f
    }
}

/// `P(q_B | q_A)` along Bob's axis, on the table's `q_B` nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalDistribution {
    pub q_a: f64,
    pub q_b: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

/// Homodyne conditional distribution at the exact value `q_A`, integrating
/// the joint Wigner function over `p_A` and `p_B`.
pub fn conditional_probability(
    joint: &dyn JointWigner,
    g: &QuadratureAxis,
    q_a: f64,
    f: &QuadratureAxis,
    grid: &SteeringGrid,
) -> Result<ConditionalDistribution> {
    check_single_modes(joint)?;
    check_axes(g, f)?;
    let n = grid.points;
    let half_width = grid
        .half_width
        .unwrap_or_else(|| GRID_SIGMAS * joint.max_std().max(1.0));
    PhaseGrid::centered(2, half_width, n)?;
    let mean = joint.mean();
    let (qa0, pa0) = g.coordinates(&mean[..2]);
    let (qb0, pb0) = f.coordinates(&mean[2..]);
    let h = 2.0 * half_width / n as f64;
    let node = |c: f64, i: usize| c - half_width + i as f64 * h;

    // Alice's q marginal, for the vanishing-slice test.
    let alice_q = |q: f64| -> f64 {
        (0..n)
            .map(|j| joint.alice_density(&g.point(q, node(pa0, j))))
            .sum::<f64>()
            * h
    };
    let peak = (0..n).map(|i| alice_q(node(qa0, i))).fold(0.0f64, f64::max);
    let mass = alice_q(q_a);
    if !(mass > SLICE_FLOOR * peak) {
        return Err(Error::EmptySlice(q_a));
    }

    let q_b: Vec<f64> = (0..n).map(|k| node(qb0, k)).collect();
    let raw: Vec<f64> = q_b
        .par_iter()
        .map(|&qb| {
            let mut s = 0.0;
            for j in 0..n {
                let x_a = g.point(q_a, node(pa0, j));
                for l in 0..n {
                    let x_b = f.point(qb, node(pb0, l));
                    s += joint.joint(&[x_a[0], x_a[1], x_b[0], x_b[1]]);
                }
            }
            s * h * h
        })
        .collect();
    let total: f64 = raw.iter().sum::<f64>() * h;
    if !(total > 0.0) {
        return Err(Error::EmptySlice(q_a));
    }
    let density: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let m1: f64 = density.iter().zip(&q_b).map(|(p, q)| p * q).sum::<f64>() * h;
    let m2: f64 = density.iter().zip(&q_b).map(|(p, q)| p * q * q).sum::<f64>() * h;
    Ok(ConditionalDistribution {
        q_a,
        q_b,
        density,
        mean: m1,
        variance: m2 - m1 * m1,
    })
}

/// `Var[q̂_B|q̂_A]` (or the `p̂` analogue): `∫P(q_A)Var[q_B|q_A]dq_A`.
pub fn conditional_variance(
    joint: &dyn JointWigner,
    g: &QuadratureAxis,
    f: &QuadratureAxis,
    which: Quadrature,
    grid: &SteeringGrid,
) -> Result<f64> {
    Ok(HomodyneTable::new(joint, g, f, grid)?
        .conditional_variance(which)
        .0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReidResult {
    pub var_q_cond: f64,
    pub var_p_cond: f64,
    pub product: f64,
    pub steering: bool,
}

/// Reid's criterion: `Var[q̂_B|q̂_A]·Var[p̂_B|p̂_A] < 1` witnesses steering.
pub fn reid_product(
    joint: &dyn JointWigner,
    g: &QuadratureAxis,
    f: &QuadratureAxis,
    grid: &SteeringGrid,
) -> Result<ReidResult> {
    let table = HomodyneTable::new(joint, g, f, grid)?;
    Ok(reid_from_table(&table))
}

fn reid_from_table(table: &HomodyneTable) -> ReidResult {
    let var_q_cond = table.conditional_variance(Quadrature::Q).0;
    let var_p_cond = table.conditional_variance(Quadrature::P).0;
    let product = var_q_cond * var_p_cond;
    ReidResult {
        var_q_cond,
        var_p_cond,
        product,
        steering: product < 1.0 - REID_TOLERANCE,
    }
}

/// `Var_c[q_B] = ∫W_A(x_A)Var[q_B|x_A]dx_A` with `q_B` measured along `f`.
pub fn avg_conditional_wigner_variance(
    joint: &dyn JointWigner,
    f: &QuadratureAxis,
    which: Quadrature,
    grid: &SteeringGrid,
) -> Result<f64> {
    let g = QuadratureAxis::standard(Party::Alice);
    Ok(HomodyneTable::new(joint, &g, f, grid)?.averaged_wigner_variance(which))
}

/// Outcome of checking `Var[q̂_B|q̂_A] ≥ Var_c[q_B]` (and for `p`). Whenever
/// `Var_c[q]·Var_c[p] < 1` it names a conditioning point whose conditional
/// Wigner function has variance product below 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub var_q_cond: f64,
    pub var_p_cond: f64,
    pub product: f64,
    pub flag: bool,
    pub var_c_q: f64,
    pub var_c_p: f64,
    pub witness_point: Option<Vec<f64>>,
    pub witness_product: Option<f64>,
    pub dropped_mass: f64,
    pub tolerance: f64,
    pub points: usize,
    pub half_width: f64,
}

pub fn verify_variance_chain(
    joint: &dyn JointWigner,
    g: &QuadratureAxis,
    f: &QuadratureAxis,
    grid: &SteeringGrid,
) -> Result<ChainReport> {
    let table = HomodyneTable::new(joint, g, f, grid)?;
    let (var_q_cond, dq) = table.conditional_variance(Quadrature::Q);
    let (var_p_cond, dp) = table.conditional_variance(Quadrature::P);
    let var_c_q = table.averaged_wigner_variance(Quadrature::Q);
    let var_c_p = table.averaged_wigner_variance(Quadrature::P);
    for (name, homodyne, wigner) in [("q", var_q_cond, var_c_q), ("p", var_p_cond, var_c_p)] {
        if homodyne < wigner - CHAIN_TOLERANCE {
            return Err(Error::ChainViolation {
                quadrature: name,
                homodyne,
                wigner,
                tolerance: CHAIN_TOLERANCE,
            });
        }
    }
    let (mut witness_point, mut witness_product) = (None, None);
    if var_c_q * var_c_p < 1.0 {
        match table.variance_product_witness() {
            (_, Some((x, p))) => {
                witness_point = Some(x.to_vec());
                witness_product = Some(p);
            }
            (min, None) => {
                return Err(Error::ChainViolation {
                    quadrature: "qp",
                    homodyne: var_c_q * var_c_p,
                    wigner: min.unwrap_or(f64::NAN),
                    tolerance: 0.0,
                })
            }
        }
    }
    let product = var_q_cond * var_p_cond;
    Ok(ChainReport {
        var_q_cond,
        var_p_cond,
        product,
        flag: product < 1.0 - REID_TOLERANCE,
        var_c_q,
        var_c_p,
        witness_point,
        witness_product,
        dropped_mass: dq.max(dp),
        tolerance: CHAIN_TOLERANCE,
        points: table.points(),
        half_width: table.half_width(),
    })
}

/// One party's default grid: centred on its mean with half-width
/// `8·max(σ, 1)`, σ the largest marginal standard deviation of the joint.
pub fn default_party_grid(joint: &dyn JointWigner, party: Party, points: usize) -> Result<PhaseGrid> {
    let layout = joint.layout();
    let mean = joint.mean();
    let center = match party {
        Party::Alice => mean[..layout.alice_dim()].to_vec(),
        Party::Bob => mean[layout.alice_dim()..].to_vec(),
    };
    PhaseGrid::new(center, GRID_SIGMAS * joint.max_std().max(1.0), points)
}

/// Bob's unnormalised conditional states, one per outcome of Alice's
/// measurement.
#[derive(Clone, Debug)]
pub struct Assemblage {
    pub elements: Vec<AssemblageElement>,
}

#[derive(Clone, Debug)]
pub struct AssemblageElement {
    pub label: Vec<f64>,
    /// Outcome measure (cell volume for continuous outcomes).
    pub weight: f64,
    /// `P(a|Â)`, including the outcome measure.
    pub probability: f64,
    /// `W_𝓑(x_B)`, integrating to `P(a|Â)/weight`.
    pub field: WignerField,
}

fn check_assemblage_inputs(
    joint: &dyn JointWigner,
    family: &dyn PovmFamily,
    alice_grid: &PhaseGrid,
    bob_grid: &PhaseGrid,
) -> Result<()> {
    let layout = joint.layout();
    if family.modes() != layout.alice_modes()
        || alice_grid.dim() != layout.alice_dim()
        || bob_grid.dim() != layout.bob_dim()
    {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Measurement matrix `(4π)^l W_a(x_A) h_A^{2l}`, outcomes by Alice nodes.
fn measurement_matrix(family: &dyn PovmFamily, alice_grid: &PhaseGrid) -> DMatrix<f64> {
    let nodes = alice_grid.nodes();
    let d = alice_grid.dim();
    let scale = FOUR_PI.powi(family.modes() as i32) * alice_grid.cell_volume();
    let rows: Vec<Vec<f64>> = (0..family.outcome_count())
        .into_par_iter()
        .map(|k| nodes.chunks(d).map(|x| scale * family.wigner(k, x)).collect())
        .collect();
    DMatrix::from_fn(rows.len(), alice_grid.len(), |k, i| rows[k][i])
}

fn sample_matrix<F>(alice_grid: &PhaseGrid, bob_grid: &PhaseGrid, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Sync,
{
    let bob_nodes = bob_grid.nodes();
    let rows: Vec<Vec<f64>> = (0..alice_grid.len())
        .into_par_iter()
        .map(|i| f(&alice_grid.point(i), &bob_nodes))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(alice_grid.len(), bob_grid.len(), |i, j| rows[i][j]))
}

fn assemble(
    family: &dyn PovmFamily,
    bob_grid: &PhaseGrid,
    bob_modes: usize,
    table: DMatrix<f64>,
) -> Result<Assemblage> {
    let cell = bob_grid.cell_volume();
    let elements = (0..family.outcome_count())
        .map(|k| {
            let values: Vec<f64> = table.row(k).iter().copied().collect();
            let weight = family.outcome_weight(k);
            let probability = values.iter().sum::<f64>() * cell * weight;
            Ok(AssemblageElement {
                label: family.outcome_label(k),
                weight,
                probability,
                field: WignerField::new(bob_grid.clone(), axis_labels(Party::Bob, bob_modes), values)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Assemblage { elements })
}

/// `W_𝓑(x_B) = (4π)^l ∫W_a(x_A)W(x_A⊕x_B)dx_A` for every outcome `a`, by
/// quadrature over `alice_grid`, sampled on `bob_grid`.
pub fn build_assemblage(
    joint: &dyn JointWigner,
    family: &dyn PovmFamily,
    alice_grid: &PhaseGrid,
    bob_grid: &PhaseGrid,
) -> Result<Assemblage> {
    check_assemblage_inputs(joint, family, alice_grid, bob_grid)?;
    let db = bob_grid.dim();
    let joint_matrix = sample_matrix(alice_grid, bob_grid, |x_a, bob_nodes| {
        let mut x = x_a.to_vec();
        x.resize(x_a.len() + db, 0.0);
        Ok(bob_nodes
            .chunks(db)
            .map(|x_b| {
                x[x_a.len()..].copy_from_slice(x_b);
                joint.joint(&x)
            })
            .collect())
    })?;
    let table = measurement_matrix(family, alice_grid) * joint_matrix;
    assemble(family, bob_grid, joint.layout().bob_modes(), table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhsCheck {
    pub max_discrepancy: f64,
    pub outcomes: usize,
    /// Alice nodes left out of the hidden-state form because her density
    /// there is below the conditioning floor.
    pub skipped_nodes: usize,
}

/// Rebuilds each assemblage element from the hidden-state form
/// `∫P(x_A) P(a|x_A) W(x_B|x_A) dx_A`, `P(a|x_A) = (4π)^l W_a(x_A)`, and
/// compares it with [`build_assemblage`]. Requires a Wigner-positive family.
pub fn lhs_reconstruction_check(
    joint: &dyn JointWigner,
    family: &dyn PovmFamily,
    alice_grid: &PhaseGrid,
    bob_grid: &PhaseGrid,
) -> Result<LhsCheck> {
    check_assemblage_inputs(joint, family, alice_grid, bob_grid)?;
    let alice_points: Vec<Vec<f64>> = (0..alice_grid.len()).map(|i| alice_grid.point(i)).collect();
    assert_positive_on(family, &alice_points)?;
    if !family.positive() {
        return Err(Error::NegativeMeasurement {
            outcome: 0,
            value: f64::NAN,
        });
    }
    let direct = build_assemblage(joint, family, alice_grid, bob_grid)?;

    let floor = POSITIVITY_FLOOR * joint.alice_peak();
    let skipped = alice_points
        .iter()
        .filter(|x| !(joint.alice_density(x) > floor))
        .count();
    let db = bob_grid.dim();
    let hidden = sample_matrix(alice_grid, bob_grid, |x_a, bob_nodes| {
        let w_a = joint.alice_density(x_a);
        if !(w_a > floor) {
            return Ok(vec![0.0; bob_nodes.len() / db]);
        }
        let cond = joint.conditional_at(x_a, w_a)?;
        Ok(bob_nodes.chunks(db).map(|x_b| w_a * cond.eval(x_b)).collect())
    })?;
    let table = measurement_matrix(family, alice_grid) * hidden;
    let rebuilt = assemble(family, bob_grid, joint.layout().bob_modes(), table)?;
    let max_discrepancy = direct
        .elements
        .iter()
        .zip(&rebuilt.elements)
        .flat_map(|(a, b)| {
            a.field
                .values()
                .iter()
                .zip(b.field.values())
                .map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max);
    Ok(LhsCheck {
        max_discrepancy,
        outcomes: family.outcome_count(),
        skipped_nodes: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::thermal_weights;
    use crate::gaussian::{make_product, make_tmsv};
    use crate::measurements::{fock_projector_family, heterodyne_family, IdentityMeasurement};
    use approx::assert_relative_eq;

    fn axes() -> (QuadratureAxis, QuadratureAxis) {
        (
            QuadratureAxis::standard(Party::Alice),
            QuadratureAxis::standard(Party::Bob),
        )
    }

    fn vacua() -> crate::gaussian::GaussianState {
        make_product(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn axis_geometry() {
        let a = QuadratureAxis::new(Party::Alice, &[3.0, 4.0]).unwrap();
        assert_eq!(a.q_direction(), [0.6, 0.8]);
        assert_eq!(a.p_direction(), [-0.8, 0.6]);
        let x = a.point(1.5, -0.5);
        let (q, p) = a.coordinates(&x);
        assert_relative_eq!(q, 1.5, epsilon = 1e-15);
        assert_relative_eq!(p, -0.5, epsilon = 1e-15);
        assert!(QuadratureAxis::new(Party::Bob, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn conditional_probability_examples() {
        let (g, f) = axes();
        let grid = SteeringGrid::default();
        let d = conditional_probability(&vacua(), &g, 0.7, &f, &grid).unwrap();
        assert_relative_eq!(d.variance, 1.0, epsilon = 1e-9);
        assert_relative_eq!(d.mean, 0.0, epsilon = 1e-12);

        let d = conditional_probability(&make_tmsv(0.5).unwrap(), &g, 1.0, &f, &grid).unwrap();
        assert_relative_eq!(d.mean, 1f64.tanh(), epsilon = 1e-9);
        assert_relative_eq!(d.variance, 1.0 / 1f64.cosh(), epsilon = 1e-9);

        let mix = thermal_weights(1.0, 30).unwrap();
        let d = conditional_probability(&mix, &g, 0.0, &f, &grid).unwrap();
        assert!(d.mean.abs() < 1e-12);
        let n = d.density.len();
        for k in 1..n / 2 {
            assert!((d.density[n / 2 - k] - d.density[n / 2 + k]).abs() < 1e-12);
        }
        assert!(matches!(
            conditional_probability(&vacua(), &g, 40.0, &f, &grid),
            Err(Error::EmptySlice(_))
        ));
    }

    #[test]
    fn variances_for_gaussian_states() {
        let (g, f) = axes();
        let grid = SteeringGrid::default();
        let report = verify_variance_chain(&vacua(), &g, &f, &grid).unwrap();
        assert_relative_eq!(report.var_q_cond, 1.0, epsilon = 1e-9);
        assert_relative_eq!(report.product, 1.0, epsilon = 1e-8);
        assert!(!report.flag);
        assert!(report.witness_point.is_none());

        let sech = 1.0 / 1f64.cosh();
        let report = verify_variance_chain(&make_tmsv(0.5).unwrap(), &g, &f, &grid).unwrap();
        for v in [report.var_q_cond, report.var_p_cond, report.var_c_q, report.var_c_p] {
            assert!((v - sech).abs() < 1e-6);
        }
        assert!((report.var_q_cond - report.var_c_q).abs() < 1e-6);
        assert!((report.product - sech * sech).abs() < 1e-6);
        assert!(report.flag);
        assert!((report.witness_product.unwrap() - sech * sech).abs() < 1e-6);
        assert_eq!(report.witness_point.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rotated_axes_give_the_same_gaussian_variances() {
        let s = make_tmsv(0.5).unwrap();
        let g = QuadratureAxis::new(Party::Alice, &[1.0, 1.0]).unwrap();
        let f = QuadratureAxis::new(Party::Bob, &[1.0, -1.0]).unwrap();
        let r = reid_product(&s, &g, &f, &SteeringGrid::default()).unwrap();
        let sech = 1.0 / 1f64.cosh();
        assert!((r.var_q_cond - sech).abs() < 1e-6);
        assert!((r.var_p_cond - sech).abs() < 1e-6);
    }

    #[test]
    fn refinement_converges() {
        let (g, f) = axes();
        let s = make_tmsv(0.7).unwrap();
        let coarse = SteeringGrid {
            points: 32,
            half_width: Some(10.0),
        };
        let fine = SteeringGrid {
            points: 64,
            half_width: Some(10.0),
        };
        let a = conditional_variance(&s, &g, &f, Quadrature::Q, &coarse).unwrap();
        let b = conditional_variance(&s, &g, &f, Quadrature::Q, &fine).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn fock_mixture_chain() {
        let (g, f) = axes();
        let mix = thermal_weights(1.0, 30).unwrap();
        let report = verify_variance_chain(&mix, &g, &f, &SteeringGrid::default()).unwrap();
        assert!(report.var_q_cond >= report.var_c_q - CHAIN_TOLERANCE);
        assert!(report.var_p_cond >= report.var_c_p - CHAIN_TOLERANCE);
        assert!(report.product >= 1.0);
        assert!(!report.flag);
        // Bob's conditional means vanish, so both reduce to his marginal variance.
        let expected = mix.quadrature_variance();
        assert!((report.var_q_cond - expected).abs() < 1e-8);
        assert!((report.var_p_cond - expected).abs() < 1e-8);
        assert!((report.var_c_q - expected).abs() < 1e-8);
    }

    #[test]
    fn wigner_variance_of_product_is_bob_marginal() {
        let s = make_product(&DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * 2.5)).unwrap();
        let f = QuadratureAxis::standard(Party::Bob);
        let v = avg_conditional_wigner_variance(&s, &f, Quadrature::P, &SteeringGrid::default())
            .unwrap();
        assert_relative_eq!(v, 2.5, epsilon = 1e-8);
    }

    #[test]
    fn multimode_rejected() {
        let s = make_product(&DMatrix::identity(4, 4), &DMatrix::identity(2, 2)).unwrap();
        let (g, f) = axes();
        assert!(matches!(
            reid_product(&s, &g, &f, &SteeringGrid::default()),
            Err(Error::Unsupported(_))
        ));
        assert!(reid_product(&vacua(), &f, &g, &SteeringGrid::default()).is_err());
    }

    #[test]
    fn identity_measurement_assemblage_is_bob_marginal() {
        let s = make_tmsv(0.5).unwrap();
        let ag = default_party_grid(&s, Party::Alice, 40).unwrap();
        let bg = default_party_grid(&s, Party::Bob, 40).unwrap();
        let fam = IdentityMeasurement::new(1).unwrap();
        let a = build_assemblage(&s, &fam, &ag, &bg).unwrap();
        let bob = s.bob_density();
        for (i, v) in a.elements[0].field.values().iter().enumerate() {
            assert!((v - bob.eval(&bg.point(i)).unwrap()).abs() < 1e-8);
        }
        let check = lhs_reconstruction_check(&s, &fam, &ag, &bg).unwrap();
        assert!(check.max_discrepancy < 1e-12);
    }

    #[test]
    fn heterodyne_assemblage_matches_gaussian_oracle() {
        // P(a) = N(a; 0, V_A + I); Bob's conditional state has mean
        // V_BA(V_A+I)⁻¹a and covariance V_B − V_BA(V_A+I)⁻¹V_AB.
        let r: f64 = 0.5;
        let (c, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let s = make_tmsv(r).unwrap();
        let ag = default_party_grid(&s, Party::Alice, 48).unwrap();
        let bg = default_party_grid(&s, Party::Bob, 48).unwrap();
        let fam = heterodyne_family(PhaseGrid::centered(2, 3.0, 16).unwrap()).unwrap();
        let asm = build_assemblage(&s, &fam, &ag, &bg).unwrap();
        let var_b = c - sh * sh / (c + 1.0);
        for k in [0, 100, 136, 255] {
            let a = fam.outcome_label(k);
            let el = &asm.elements[k];
            let pa = (-(a[0] * a[0] + a[1] * a[1]) / (2.0 * (c + 1.0))).exp()
                / (2.0 * std::f64::consts::PI * (c + 1.0));
            assert!((el.probability / el.weight - pa).abs() < 1e-8);
            let mean = [sh / (c + 1.0) * a[0], -sh / (c + 1.0) * a[1]];
            for i in [0usize, 777, 1176, 2000] {
                let x = bg.point(i);
                let d2 = (x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2);
                let expected = pa * (-d2 / (2.0 * var_b)).exp() / (2.0 * std::f64::consts::PI * var_b);
                assert!((el.field.values()[i] - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lhs_identity_holds() {
        let fam = heterodyne_family(PhaseGrid::centered(2, 4.0, 16).unwrap()).unwrap();
        let tmsv = make_tmsv(0.5).unwrap();
        let ag = default_party_grid(&tmsv, Party::Alice, 32).unwrap();
        let bg = default_party_grid(&tmsv, Party::Bob, 32).unwrap();
        assert!(lhs_reconstruction_check(&tmsv, &fam, &ag, &bg).unwrap().max_discrepancy < 1e-6);
        let mix = thermal_weights(1.0, 30).unwrap();
        let ag = default_party_grid(&mix, Party::Alice, 32).unwrap();
        let bg = default_party_grid(&mix, Party::Bob, 32).unwrap();
        assert!(lhs_reconstruction_check(&mix, &fam, &ag, &bg).unwrap().max_discrepancy < 1e-6);
    }

    #[test]
    fn lhs_rejects_negative_measurements() {
        let s = make_tmsv(0.5).unwrap();
        let ag = default_party_grid(&s, Party::Alice, 16).unwrap();
        let bg = default_party_grid(&s, Party::Bob, 16).unwrap();
        assert!(matches!(
            lhs_reconstruction_check(&s, &fock_projector_family(2), &ag, &bg),
            Err(Error::NegativeMeasurement { .. })
        ));
    }
}
