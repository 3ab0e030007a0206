#![allow(dead_code)]

use cvphase::gaussian::GaussianState;
use cvphase::phase_space::ModeLayout;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `R(θ)·diag(e^s, e^{-s})`, a single-mode symplectic map.
fn local(theta: f64, s: f64) -> DMatrix<f64> {
    let (c, si) = (theta.cos(), theta.sin());
    DMatrix::from_row_slice(2, 2, &[c, -si, si, c]) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s.exp(), (-s).exp()]))
}

/// Two-mode squeezer, `[[cosh r·I, sinh r·Z], [sinh r·Z, cosh r·I]]`.
fn two_mode(r: f64) -> DMatrix<f64> {
    let (c, s) = (r.cosh(), r.sinh());
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    m
}

/// Random physical one-plus-one-mode states: `V = S(I + εMMᵀ)Sᵀ` with `S`
/// a two-mode squeezer followed by local squeezers and rotations. `V ≥ I`
/// before `S`, so every draw satisfies the uncertainty relation.
pub fn gaussian_state() -> impl Strategy<Value = GaussianState> {
    gaussian_state_within(1.0, 0.6)
}

/// Weakly squeezed draws whose conditional widths stay resolvable on the
/// default steering grids.
pub fn mild_gaussian_state() -> impl Strategy<Value = GaussianState> {
    gaussian_state_within(0.5, 0.3)
}

fn gaussian_state_within(r_max: f64, s_max: f64) -> impl Strategy<Value = GaussianState> {
    (
        proptest::array::uniform16(-1.0..1.0f64),
        0.0..0.5f64,
        0.0..r_max,
        (-s_max..s_max, -s_max..s_max, 0.0..6.3f64, 0.0..6.3f64),
        proptest::array::uniform4(-1.0..1.0f64),
    )
        .prop_map(|(m, eps, r, (s1, s2, t1, t2), mean)| {
            let m = DMatrix::from_row_slice(4, 4, &m);
            let v0 = DMatrix::identity(4, 4) + &m * m.transpose() * eps;
            let mut l = DMatrix::zeros(4, 4);
            l.view_mut((0, 0), (2, 2)).copy_from(&local(t1, s1));
            l.view_mut((2, 2), (2, 2)).copy_from(&local(t2, s2));
            let s = l * two_mode(r);
            let v = &s * v0 * s.transpose();
            let v = (&v + v.transpose()) * 0.5;
            GaussianState::new(mean.to_vec(), v, ModeLayout::single()).expect("physical by construction")
        })
}

pub fn point2(radius: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-radius..radius, 2)
}
