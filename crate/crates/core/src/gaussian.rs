//! Gaussian states, their conditional (Schur-complement) Wigner functions and
//! the displaced number-operator witnesses that test the conditional
//! covariance against the uncertainty relation.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::phase_space::{omega_apply, symplectic_form, ModeLayout, Party};

/// `λ_min(V + iΩ) < -HEISENBERG_TOLERANCE` counts as an uncertainty violation.
pub const HEISENBERG_TOLERANCE: f64 = 1e-9;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Mean vector and covariance matrix of a bipartite Gaussian state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GaussianStateJson", into = "GaussianStateJson")]
pub struct GaussianState {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    layout: ModeLayout,
    joint: GaussianDensity,
    alice: GaussianDensity,
}

impl PartialEq for GaussianState {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance && self.layout == other.layout
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GaussianStateJson {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    n_alice_modes: usize,
    n_bob_modes: usize,
}

impl TryFrom<GaussianStateJson> for GaussianState {
    type Error = Error;

    fn try_from(raw: GaussianStateJson) -> Result<Self> {
        let layout = ModeLayout::new(raw.n_alice_modes, raw.n_bob_modes)?;
        let n = raw.covariance.len();
        if raw.covariance.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidState("covariance must be square".into()));
        }
        let flat: Vec<f64> = raw.covariance.into_iter().flatten().collect();
        GaussianState::new(raw.mean, DMatrix::from_row_slice(n, n, &flat), layout)
    }
}

impl From<GaussianState> for GaussianStateJson {
    fn from(s: GaussianState) -> Self {
        let n = s.covariance.nrows();
        Self {
            mean: s.mean.as_slice().to_vec(),
            covariance: (0..n)
                .map(|i| s.covariance.row(i).iter().copied().collect())
                .collect(),
            n_alice_modes: s.layout.alice_modes(),
            n_bob_modes: s.layout.bob_modes(),
        }
    }
}

impl GaussianState {
    /// Validates symmetry, positive definiteness and the Heisenberg relation.
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>, layout: ModeLayout) -> Result<Self> {
        let n = layout.dim();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
            return Err(Error::InvalidState("covariance is not symmetric".into()));
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        if covariance.clone().cholesky().is_none() {
            return Err(Error::InvalidState(
                "covariance is not positive definite".into(),
            ));
        }
        let defect = heisenberg_defect(&covariance)?;
        if defect < -HEISENBERG_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "covariance violates the uncertainty relation (λ_min = {defect:e})"
            )));
        }
        Ok(Self::assemble(DVector::from_vec(mean), covariance, layout))
    }

    fn assemble(mean: DVector<f64>, covariance: DMatrix<f64>, layout: ModeLayout) -> Self {
        let a = layout.alice_dim();
        let joint = GaussianDensity::new(mean.clone(), covariance.clone())
            .expect("validated covariance is positive definite");
        let alice = GaussianDensity::new(
            mean.rows(0, a).into_owned(),
            covariance.view((0, 0), (a, a)).into_owned(),
        )
        .expect("principal block of a positive definite matrix");
        Self {
            mean,
            covariance,
            layout,
            joint,
            alice,
        }
    }

    pub fn vacuum(layout: ModeLayout) -> Self {
        let n = layout.dim();
        Self::assemble(DVector::zeros(n), DMatrix::identity(n, n), layout)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    /// `V_A`.
    pub fn alice_block(&self) -> DMatrix<f64> {
        let a = self.layout.alice_dim();
        self.covariance.view((0, 0), (a, a)).into_owned()
    }

    /// `V_B`.
    pub fn bob_block(&self) -> DMatrix<f64> {
        let a = self.layout.alice_dim();
        let b = self.layout.bob_dim();
        self.covariance.view((a, a), (b, b)).into_owned()
    }

    /// `V_AB` (rows on Alice's side).
    pub fn cross_block(&self) -> DMatrix<f64> {
        let a = self.layout.alice_dim();
        let b = self.layout.bob_dim();
        self.covariance.view((0, a), (a, b)).into_owned()
    }

    pub fn alice_mean(&self) -> DVector<f64> {
        self.mean.rows(0, self.layout.alice_dim()).into_owned()
    }

    pub fn bob_mean(&self) -> DVector<f64> {
        self.mean
            .rows(self.layout.alice_dim(), self.layout.bob_dim())
            .into_owned()
    }

    /// Largest standard deviation along any coordinate axis.
    pub fn max_std(&self) -> f64 {
        self.covariance
            .diagonal()
            .iter()
            .copied()
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// The Gaussian Wigner function at `x`.
    pub fn wigner_eval(&self, x: &[f64]) -> Result<f64> {
        self.joint.eval(x)
    }

    pub fn density(&self) -> GaussianDensity {
        self.joint.clone()
    }

    pub fn alice_density(&self) -> GaussianDensity {
        self.alice.clone()
    }

    pub(crate) fn joint_ref(&self) -> &GaussianDensity {
        &self.joint
    }

    pub(crate) fn alice_ref(&self) -> &GaussianDensity {
        &self.alice
    }

    pub fn bob_density(&self) -> GaussianDensity {
        GaussianDensity::new(self.bob_mean(), self.bob_block())
            .expect("principal block of a positive definite matrix")
    }
}

/// A normalised Gaussian density with its precision matrix cached.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.nrows(),
            });
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(Error::Singular("covariance"))?;
        let det = chol.determinant();
        let precision = chol.inverse();
        let norm = ((2.0 * PI).powi(n as i32) * det).sqrt().recip();
        Ok(Self {
            mean,
            covariance,
            precision,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Peak value `1 / ((2π)^{n/2} √det V)`.
    pub fn peak(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            let di = x[i] - self.mean[i];
            let mut row = 0.0;
            for j in 0..n {
                row += self.precision[(i, j)] * (x[j] - self.mean[j]);
            }
            q += di * row;
        }
        self.norm * (-0.5 * q).exp()
    }
}

/// Gaussian Wigner function of Bob's modes conditioned on Alice's point `x_A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalGaussian {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub x_a: Vec<f64>,
}

/// `V_{B|A} = V_B - V_BA V_A⁻¹ V_AB`.
pub fn schur_complement(state: &GaussianState) -> Result<DMatrix<f64>> {
    let va_inv = state
        .alice_block()
        .cholesky()
        .ok_or(Error::Singular("V_A"))?
        .inverse();
    let vab = state.cross_block();
    let s = state.bob_block() - vab.transpose() * va_inv * &vab;
    Ok((&s + s.transpose()) * 0.5)
}

/// `V_BA V_A⁻¹`, the regression of Bob's coordinates on Alice's.
pub fn regression_matrix(state: &GaussianState) -> Result<DMatrix<f64>> {
    let va_inv = state
        .alice_block()
        .cholesky()
        .ok_or(Error::Singular("V_A"))?
        .inverse();
    Ok(state.cross_block().transpose() * va_inv)
}

pub fn conditional_gaussian(state: &GaussianState, x_a: &[f64]) -> Result<ConditionalGaussian> {
    let a = state.layout().alice_dim();
    if x_a.len() != a {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: x_a.len(),
        });
    }
    let reg = regression_matrix(state)?;
    let shift = DVector::from_column_slice(x_a) - state.alice_mean();
    Ok(ConditionalGaussian {
        mean: state.bob_mean() + reg * shift,
        covariance: schur_complement(state)?,
        x_a: x_a.to_vec(),
    })
}

fn check_square_even(v: &DMatrix<f64>) -> Result<usize> {
    if v.nrows() != v.ncols() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    if v.nrows() == 0 || v.nrows() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "phase-space matrices need an even dimension, got {}",
            v.nrows()
        )));
    }
    Ok(v.nrows() / 2)
}

/// Smallest eigenvalue of the Hermitian matrix `V + iΩ`.
///
/// Computed through the real symmetric embedding `[[V, -Ω], [Ω, V]]`, whose
/// spectrum is that of `V + iΩ` with every eigenvalue doubled.
pub fn heisenberg_defect(v: &DMatrix<f64>) -> Result<f64> {
    let modes = check_square_even(v)?;
    let n = 2 * modes;
    let omega = symplectic_form(modes)?;
    let mut embed = DMatrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(v);
    embed.view_mut((n, n), (n, n)).copy_from(v);
    embed.view_mut((0, n), (n, n)).copy_from(&(-&omega));
    embed.view_mut((n, 0), (n, n)).copy_from(&omega);
    let embed = (&embed + embed.transpose()) * 0.5;
    Ok(embed.symmetric_eigenvalues().min())
}

/// `V + ΩᵀVΩ`.
pub fn number_witness_matrix(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let modes = check_square_even(v)?;
    let omega = symplectic_form(modes)?;
    let m = v + omega.transpose() * v * &omega;
    Ok((&m + m.transpose()) * 0.5)
}

fn unit(f: &[f64], dim: usize) -> Result<Vec<f64>> {
    if f.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f.len(),
        });
    }
    let norm = f.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(f.iter().map(|c| c / norm).collect())
}

/// `¼(fᵀ[V + ΩᵀVΩ]f − 2)`: the number-operator expectation along axis `f`
/// for a Gaussian with covariance `V`, displaced to its own mean.
pub fn number_witness_value(v: &DMatrix<f64>, f: &[f64]) -> Result<f64> {
    let m = number_witness_matrix(v)?;
    let f = DVector::from_vec(unit(f, v.nrows())?);
    Ok(0.25 * ((f.transpose() * m * &f)[(0, 0)] - 2.0))
}

/// Expectation of `D(d) n̂(f) D†(d)` in a Gaussian with mean `mean` and
/// covariance `v`.
pub fn displaced_number_expectation(
    mean: &DVector<f64>,
    v: &DMatrix<f64>,
    f: &[f64],
    displacement: &[f64],
) -> Result<f64> {
    let n = v.nrows();
    if mean.len() != n || displacement.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: displacement.len(),
        });
    }
    let f = unit(f, n)?;
    let delta: Vec<f64> = mean.iter().zip(displacement).map(|(m, d)| m - d).collect();
    let q: f64 = f.iter().zip(&delta).map(|(a, b)| a * b).sum();
    let p: f64 = f.iter().zip(omega_apply(&delta)).map(|(a, b)| a * b).sum();
    Ok(number_witness_value(v, &f)? + 0.25 * (q * q + p * p))
}

/// Best axis for the displaced number witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumberWitness {
    pub axis: Vec<f64>,
    pub value: f64,
}

/// Minimises [`number_witness_value`] over unit axes: the lowest eigenvector
/// of `V + ΩᵀVΩ`, value `λ_min/4 − ½`.
///
/// Degenerate minima resolve to the eigenvector that comes first in the
/// solver's output, with its first significant component made positive.
pub fn optimal_number_witness(v: &DMatrix<f64>) -> Result<NumberWitness> {
    let m = number_witness_matrix(v)?;
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let lowest = eig.eigenvalues.min();
    let idx = eig
        .eigenvalues
        .iter()
        .position(|&l| l <= lowest + 1e-12 * scale)
        .expect("non-empty spectrum");
    let mut axis: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    canonical_sign(&mut axis);
    Ok(NumberWitness {
        axis,
        value: 0.25 * lowest - 0.5,
    })
}

fn canonical_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Williamson normal form `V = S diag(ν₁, ν₁, ν₂, ν₂, ...) Sᵀ` with `S`
/// symplectic and the symplectic eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct Williamson {
    pub symplectic_eigenvalues: Vec<f64>,
    pub symplectic: DMatrix<f64>,
}

pub fn williamson(v: &DMatrix<f64>) -> Result<Williamson> {
    let modes = check_square_even(v)?;
    let n = 2 * modes;
    let eig = v.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidParameter(
            "Williamson form needs a positive definite matrix".into(),
        ));
    }
    let sqrt_v = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let inv_sqrt_v = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt().recip()))
        * eig.eigenvectors.transpose();
    let omega = symplectic_form(modes)?;
    // A = V^{-1/2} Ω V^{-1/2} is antisymmetric; iA is Hermitian with spectrum ±1/ν_k.
    let a = &inv_sqrt_v * omega * &inv_sqrt_v;
    let h: DMatrix<Complex<f64>> = a.map(|x| Complex::new(0.0, x));
    let h = (&h + h.adjoint()) * Complex::new(0.5, 0.0);
    let heig = h.symmetric_eigen();

    let mut positive: Vec<(f64, usize)> = heig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &mu)| mu > 0.0)
        .map(|(i, &mu)| (mu, i))
        .collect();
    if positive.len() != modes {
        return Err(Error::InvalidParameter(
            "could not separate the symplectic spectrum".into(),
        ));
    }
    // Descending μ is ascending ν.
    positive.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let mut o = DMatrix::zeros(n, n);
    let mut nu = Vec::with_capacity(modes);
    for (k, &(mu, i)) in positive.iter().enumerate() {
        let u = heig.eigenvectors.column(i);
        for r in 0..n {
            o[(r, 2 * k)] = std::f64::consts::SQRT_2 * u[r].im;
            o[(r, 2 * k + 1)] = std::f64::consts::SQRT_2 * u[r].re;
        }
        nu.push(mu.recip());
    }
    let d_inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        nu.iter().flat_map(|&x| [x.sqrt().recip(); 2]),
    ));
    let s = sqrt_v * o * d_inv_sqrt;
    Ok(Williamson {
        symplectic_eigenvalues: nu,
        symplectic: s,
    })
}

/// Gaussian-steering verdict from the conditional covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteeringVerdict {
    pub steerable: bool,
    pub defect: f64,
}

/// Alice steers Bob with Gaussian measurements iff `V_{B|A}` violates the
/// uncertainty relation.
pub fn gaussian_steerable(state: &GaussianState) -> Result<SteeringVerdict> {
    let defect = heisenberg_defect(&schur_complement(state)?)?;
    Ok(SteeringVerdict {
        steerable: defect < -HEISENBERG_TOLERANCE,
        defect,
    })
}

/// Two-mode squeezed vacuum with squeezing `r`:
/// `V = [[cosh 2r·I, sinh 2r·Z], [sinh 2r·Z, cosh 2r·I]]`, `Z = diag(1, -1)`.
pub fn make_tmsv(r: f64) -> Result<GaussianState> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("squeezing {r} is not finite")));
    }
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    #[rustfmt::skip]
    let v = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    GaussianState::new(vec![0.0; 4], v, ModeLayout::single())
}

/// Uncorrelated product of two zero-mean Gaussian states.
pub fn make_product(v_a: &DMatrix<f64>, v_b: &DMatrix<f64>) -> Result<GaussianState> {
    let la = check_square_even(v_a)?;
    let lb = check_square_even(v_b)?;
    let layout = ModeLayout::new(la, lb)?;
    let (a, n) = (2 * la, layout.dim());
    let mut v = DMatrix::zeros(n, n);
    v.view_mut((0, 0), (a, a)).copy_from(v_a);
    v.view_mut((a, a), (n - a, n - a)).copy_from(v_b);
    GaussianState::new(vec![0.0; n], v, layout)
}

/// Pure-loss channel of transmissivity `eta` on one party: that party's block
/// becomes `ηV + (1−η)I`, the cross blocks scale by `√η` and its mean by `√η`.
pub fn attenuate(state: &GaussianState, party: Party, eta: f64) -> Result<GaussianState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "transmissivity must lie in [0, 1], got {eta}"
        )));
    }
    let layout = state.layout();
    let n = layout.dim();
    let lossy = |i: usize| match party {
        Party::Alice => i < layout.alice_dim(),
        Party::Bob => i >= layout.alice_dim(),
    };
    let g = eta.sqrt();
    let mut v = state.covariance().clone();
    let mut mean = state.mean().as_slice().to_vec();
    for i in 0..n {
        if lossy(i) {
            mean[i] *= g;
        }
        for j in 0..n {
            v[(i, j)] = match (lossy(i), lossy(j)) {
                (true, true) => eta * v[(i, j)] + if i == j { 1.0 - eta } else { 0.0 },
                (true, false) | (false, true) => g * v[(i, j)],
                (false, false) => v[(i, j)],
            };
        }
    }
    GaussianState::new(mean, v, layout)
}
