//! Pointwise (0D) small-strain plasticity by radial return.

use crate::scalar::Real;
use crate::tensor::{elasticity_apply, MaterialParams, Mat3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hardening {
    /// Linear kinematic hardening with backstress `μk₁ εᵖ`.
    Kinematic,
    /// Linear isotropic hardening, radius `σ_y + μk₂γ`.
    Isotropic,
}

/// Material state after one strain increment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState<T> {
    pub sigma: Mat3<T>,
    pub eps_p: Mat3<T>,
    pub gamma: T,
    /// True when the increment was plastic.
    pub plastic: bool,
}

/// One radial-return update from `(eps_p, gamma)` at total strain `eps`.
pub fn radial_return_step<T: Real>(
    params: &MaterialParams<T>,
    hardening: Hardening,
    eps: &Mat3<T>,
    eps_p: &Mat3<T>,
    gamma: T,
) -> PointState<T> {
    let two_mu = T::lit(2.0) * params.mu;
    let s = (*eps - *eps_p).dev() * two_mu;
    let (eta, radius, modulus) = match hardening {
        Hardening::Kinematic => (
            s - *eps_p * (params.mu * params.k1),
            params.sigma_y,
            two_mu + params.mu * params.k1,
        ),
        Hardening::Isotropic => (
            s,
            params.sigma_y + params.mu * params.k2 * gamma,
            two_mu + params.mu * params.k2,
        ),
    };
    let norm = eta.norm();
    let (eps_p, gamma, plastic) = if norm > radius {
        let dl = (norm - radius) / modulus;
        (*eps_p + eta * (dl / norm), gamma + dl, true)
    } else {
        (*eps_p, gamma, false)
    };
    PointState {
        sigma: elasticity_apply(params, &(*eps - eps_p)),
        eps_p,
        gamma,
        plastic,
    }
}

/// Runs a strain path starting from the virgin state.
pub fn radial_return_0d<T: Real>(
    params: &MaterialParams<T>,
    strain_path: &[Mat3<T>],
    hardening: Hardening,
) -> Vec<PointState<T>> {
    let mut eps_p = Mat3::zero();
    let mut gamma = T::zero();
    strain_path
        .iter()
        .map(|eps| {
            let st = radial_return_step(params, hardening, eps, &eps_p, gamma);
            eps_p = st.eps_p;
            gamma = st.gamma;
            st
        })
        .collect()
}

/// Symmetric pure shear `ε₁₂ = ε₂₁ = s/2`.
pub fn pure_shear<T: Real>(s: T) -> Mat3<T> {
    let half = s * T::lit(0.5);
    let mut m = Mat3::zero();
    m.0[0][1] = half;
    m.0[1][0] = half;
    m
}
