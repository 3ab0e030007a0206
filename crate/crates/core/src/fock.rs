//! Fock-state Wigner functions and the classically correlated Fock mixture
//! `Σ pₙ |n⟩⟨n| ⊗ |n⟩⟨n|`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `W_m(x) < -NEGATIVITY_TOLERANCE` counts as negative.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12 / (2.0 * PI);

/// Default tail mass below which a thermal mixture is truncated.
pub const DEFAULT_TAIL: f64 = 1e-8;

/// Laguerre polynomial `L_n(u)` by upward recurrence
/// `(k+1)L_{k+1} = (2k+1-u)L_k - kL_{k-1}`.
pub fn laguerre(n: usize, u: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - u;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - u) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `[L_0(u), ..., L_max(u)]`.
pub fn laguerre_all(max: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(1.0 - u);
    }
    for k in 1..max {
        let kf = k as f64;
        out.push(((2.0 * kf + 1.0 - u) * out[k] - kf * out[k - 1]) / (kf + 1.0));
    }
    out
}

/// `W_n` as a function of `u = ‖x‖²`: `(-1)ⁿ L_n(u) e^{-u/2} / 2π`.
pub fn fock_wigner_radial(n: usize, u: f64) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * laguerre(n, u) * (-u / 2.0).exp() / (2.0 * PI)
}

/// `[W_0(u), ..., W_max(u)]` from a single recurrence pass.
pub fn fock_wigner_levels(max: usize, u: f64) -> Vec<f64> {
    let g = (-u / 2.0).exp() / (2.0 * PI);
    laguerre_all(max, u)
        .into_iter()
        .enumerate()
        .map(|(n, l)| if n % 2 == 0 { l * g } else { -l * g })
        .collect()
}

fn single_mode_norm_sqr(x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        });
    }
    Ok(x[0] * x[0] + x[1] * x[1])
}

/// Wigner function of `|n⟩⟨n|` at a single-mode point.
pub fn fock_wigner(n: usize, x: &[f64]) -> Result<f64> {
    Ok(fock_wigner_radial(n, single_mode_norm_sqr(x)?))
}

/// Residual of `(m+1)W_{m+1} = (‖x‖² − 2m − 1)W_m − mW_{m−1}`.
pub fn verify_fock_recurrence(m: usize, x: &[f64]) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("recurrence needs m ≥ 1".into()));
    }
    let u = single_mode_norm_sqr(x)?;
    let w = |n| fock_wigner_radial(n, u);
    let mf = m as f64;
    Ok(((mf + 1.0) * w(m + 1) - ((u - 2.0 * mf - 1.0) * w(m) - mf * w(m - 1))).abs())
}

/// Smallest `m ≤ m_max` with `W_m(x) < -NEGATIVITY_TOLERANCE`.
pub fn find_negative_fock(x: &[f64], m_max: usize) -> Result<usize> {
    let u = single_mode_norm_sqr(x)?;
    fock_wigner_levels(m_max, u)
        .iter()
        .position(|&w| w < -NEGATIVITY_TOLERANCE)
        .ok_or(Error::NoNegativeLevel(m_max))
}

/// Photon-number distribution of a thermal state with mean photon number `t`:
/// `pₙ = tⁿ / (1+t)^{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalWeights {
    t: f64,
}

impl ThermalWeights {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mean photon number must be positive, got {t}"
            )));
        }
        Ok(Self { t })
    }

    pub fn mean_photons(&self) -> f64 {
        self.t
    }

    pub fn ratio(&self) -> f64 {
        self.t / (1.0 + self.t)
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.ratio().powi(n as i32) / (1.0 + self.t)
    }

    /// `Σ_{n > cutoff} pₙ = (t/(1+t))^{cutoff+1}`.
    pub fn tail_mass(&self, cutoff: usize) -> f64 {
        self.ratio().powi(cutoff as i32 + 1)
    }

    /// Smallest cutoff (at least 1) whose tail mass is below `tail`.
    pub fn cutoff_for_tail(&self, tail: f64) -> usize {
        let mut c = 1;
        while self.tail_mass(c) >= tail {
            c += 1;
        }
        c
    }
}

/// Diagonal correlated mixture `Σ_{n ≤ cutoff} pₙ |n⟩⟨n| ⊗ |n⟩⟨n|`, one mode
/// per party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FockMixtureJson", into = "FockMixtureJson")]
pub struct FockMixtureState {
    weights: Vec<f64>,
    t: Option<f64>,
    tail_mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FockMixtureJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cutoff: Option<usize>,
}

impl TryFrom<FockMixtureJson> for FockMixtureState {
    type Error = Error;

    fn try_from(raw: FockMixtureJson) -> Result<Self> {
        match (raw.weights, raw.t) {
            (Some(weights), t) => {
                if let Some(c) = raw.cutoff {
                    if c + 1 != weights.len() {
                        return Err(Error::InvalidState(format!(
                            "cutoff {c} disagrees with {} weights",
                            weights.len()
                        )));
                    }
                }
                let mut state = FockMixtureState::new(weights)?;
                state.t = t;
                Ok(state)
            }
            (None, Some(t)) => match raw.cutoff {
                Some(c) => thermal_weights(t, c),
                None => FockMixtureState::thermal(t),
            },
            (None, None) => Err(Error::InvalidState(
                "Fock mixture needs either weights or t".into(),
            )),
        }
    }
}

impl From<FockMixtureState> for FockMixtureJson {
    fn from(s: FockMixtureState) -> Self {
        Self {
            cutoff: Some(s.cutoff()),
            t: s.t,
            weights: Some(s.weights),
        }
    }
}

impl FockMixtureState {
    /// Arbitrary non-negative weights for `n = 0..=cutoff`, summing to at most 1.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidState("cutoff must be at least 1".into()));
        }
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidState("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total} > 1")));
        }
        Ok(Self {
            weights,
            t: None,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    /// Thermal weights truncated where the tail mass drops below [`DEFAULT_TAIL`].
    pub fn thermal(t: f64) -> Result<Self> {
        let c = ThermalWeights::new(t)?.cutoff_for_tail(DEFAULT_TAIL);
        thermal_weights(t, c)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn t(&self) -> Option<f64> {
        self.t
    }

    /// Probability mass beyond the cutoff.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Bound on the truncation error of [`Self::joint`], using `|W_n| ≤ 1/2π`.
    pub fn joint_truncation_bound(&self) -> f64 {
        self.tail_mass / (4.0 * PI * PI)
    }

    /// Bound on the truncation error of a reduced Wigner function.
    pub fn reduced_truncation_bound(&self) -> f64 {
        self.tail_mass / (2.0 * PI)
    }

    /// `Σ pₙ (2n+1)`, the quadrature variance of either party.
    pub fn quadrature_variance(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(n, p)| p * (2 * n + 1) as f64)
            .sum()
    }

    pub(crate) fn levels(&self, u: f64) -> Vec<f64> {
        fock_wigner_levels(self.cutoff(), u)
    }

    /// `Σ pₙ W_n(x_A) W_n(x_B)`.
    pub fn joint(&self, x_a: &[f64], x_b: &[f64]) -> Result<f64> {
        let wa = self.levels(single_mode_norm_sqr(x_a)?);
        let wb = self.levels(single_mode_norm_sqr(x_b)?);
        Ok(self
            .weights
            .iter()
            .zip(wa.iter().zip(&wb))
            .map(|(p, (a, b))| p * a * b)
            .sum())
    }

    /// `Σ pₙ W_n(x)`, the reduced state of either party.
    pub fn reduced(&self, x: &[f64]) -> Result<f64> {
        Ok(self.reduced_radial(single_mode_norm_sqr(x)?))
    }

    pub(crate) fn reduced_radial(&self, u: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.levels(u))
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Maximum of the reduced Wigner function over a radial scan.
    pub fn reduced_peak(&self) -> f64 {
        let u_max = 4.0 * self.cutoff() as f64 + 10.0;
        (0..=4000)
            .map(|i| self.reduced_radial(u_max * i as f64 / 4000.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Thermal weights `pₙ = tⁿ/(1+t)^{n+1}` for `n = 0..=cutoff`.
pub fn thermal_weights(t: f64, cutoff: usize) -> Result<FockMixtureState> {
    let thermal = ThermalWeights::new(t)?;
    if cutoff == 0 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    let weights: Vec<f64> = (0..=cutoff).map(|n| thermal.weight(n)).collect();
    Ok(FockMixtureState {
        weights,
        t: Some(t),
        tail_mass: thermal.tail_mass(cutoff),
    })
}

pub fn mixture_joint_wigner(state: &FockMixtureState, x_a: &[f64], x_b: &[f64]) -> Result<f64> {
    state.joint(x_a, x_b)
}

pub fn mixture_reduced_alice(state: &FockMixtureState, x_a: &[f64]) -> Result<f64> {
    state.reduced(x_a)
}
