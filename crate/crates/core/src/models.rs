//! The five model variants: free energy, Eshelby-type stress, yield function
//! and incremental dissipation.

use std::fmt;
use std::str::FromStr;

use crate::assembly::{discrete_curl, displacement_gradient, interpolate_tensor, DefectForm};
use crate::dofs::TensorSpace;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, ShapeData, TensorField, VectorField};
use crate::scalar::Real;
use crate::tensor::{cross, elasticity_apply, MaterialParams, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariantTag {
    /// Kinematic hardening with plastic spin.
    KinSpin,
    /// Isotropic hardening with plastic spin.
    IsoSpin,
    /// Irrotational isotropic hardening (flow of `εᵖ = sym p`).
    IsoIrrot,
    /// Purely energetic kinematic hardening in `εᵖ`.
    KinIrrot,
    /// Elastic micromorphic model: no flow rule, direct minimization.
    Micromorphic,
}

impl VariantTag {
    pub const ALL: [VariantTag; 5] = [
        VariantTag::KinSpin,
        VariantTag::IsoSpin,
        VariantTag::IsoIrrot,
        VariantTag::KinIrrot,
        VariantTag::Micromorphic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantTag::KinSpin => "kin_spin",
            VariantTag::IsoSpin => "iso_spin",
            VariantTag::IsoIrrot => "iso_irrot",
            VariantTag::KinIrrot => "kin_irrot",
            VariantTag::Micromorphic => "micromorphic",
        }
    }

    /// Uses the backstress `μk₁ dev sym p`.
    pub fn is_kinematic(self) -> bool {
        matches!(self, VariantTag::KinSpin | VariantTag::KinIrrot | VariantTag::Micromorphic)
    }

    /// Uses the isotropic hardening energy `½μk₂γ²`.
    pub fn is_isotropic(self) -> bool {
        matches!(self, VariantTag::IsoSpin | VariantTag::IsoIrrot)
    }

    pub fn is_irrotational(self) -> bool {
        matches!(self, VariantTag::IsoIrrot | VariantTag::KinIrrot)
    }

    pub fn has_flow_rule(self) -> bool {
        self != VariantTag::Micromorphic
    }

    /// Pointwise space of the plastic unknown.
    pub fn space(self) -> TensorSpace {
        if self.is_irrotational() {
            TensorSpace::SymTraceFree
        } else {
            TensorSpace::TraceFree
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown variant {s:?}")))
    }
}

/// A model variant with its material constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelVariant<T> {
    pub tag: VariantTag,
    pub params: MaterialParams<T>,
    /// Route of the defect operator; both give the same form.
    pub defect_form: DefectForm,
}

impl<T: Real> ModelVariant<T> {
    pub fn new(tag: VariantTag, params: MaterialParams<T>) -> Result<Self> {
        params.validate()?;
        if tag.is_kinematic() && !(params.k1 > T::zero()) {
            return Err(Error::InvalidParams(format!("{tag} requires k1 > 0")));
        }
        if tag.is_isotropic() && !(params.k2 > T::zero()) {
            return Err(Error::InvalidParams(format!("{tag} requires k2 > 0")));
        }
        Ok(ModelVariant {
            tag,
            params,
            defect_form: DefectForm::Curl,
        })
    }

    pub fn with_defect_form(mut self, form: DefectForm) -> Self {
        self.defect_form = form;
        self
    }

    pub fn space(&self) -> TensorSpace {
        self.tag.space()
    }
}

/// State of a simulation after a step.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState<T> {
    pub u: VectorField<T>,
    pub p: TensorField<T>,
    pub gamma: ScalarField<T>,
    pub t: T,
}

impl<T: Real> SimState<T> {
    /// The virgin state `u = 0, p = 0, γ = 0`.
    pub fn zero(grid: &Grid<T>) -> Self {
        SimState {
            u: VectorField::zeros(grid),
            p: TensorField::zeros(grid),
            gamma: ScalarField::zeros(grid),
            t: T::zero(),
        }
    }
}

/// Energy terms of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergySplit<T> {
    /// `∫ ½⟨C εᵉ, εᵉ⟩`.
    pub elastic: T,
    /// `∫ ½μL_c²|Curl p|²`.
    pub defect: T,
    /// `∫ ½μk₁|dev sym p|²` or `∫ ½μk₂γ²`.
    pub hardening: T,
    /// `−∫ f·u`.
    pub load: T,
}

impl<T: Real> EnergySplit<T> {
    pub fn total(&self) -> T {
        self.elastic + self.defect + self.hardening + self.load
    }

    /// Sum of the magnitudes of all terms.
    pub fn scale(&self) -> T {
        self.elastic.abs() + self.defect.abs() + self.hardening.abs() + self.load.abs()
    }
}

/// `σ = C sym(∇u − p)` at the Gauss points of every cell.
pub fn cauchy_stress<T: Real>(
    variant: &ModelVariant<T>,
    grid: &Grid<T>,
    u: &VectorField<T>,
    p: &TensorField<T>,
) -> Vec<[Mat3<T>; 8]> {
    let grads = displacement_gradient(grid, u);
    let ps = interpolate_tensor(grid, p);
    grads
        .iter()
        .zip(&ps)
        .map(|(g, q)| std::array::from_fn(|k| elasticity_apply(&variant.params, &(g[k] - q[k]))))
        .collect()
}

/// Energy of a state by direct quadrature.
pub fn total_energy<T: Real>(
    variant: &ModelVariant<T>,
    grid: &Grid<T>,
    state: &SimState<T>,
    body_force: Vec3<T>,
) -> EnergySplit<T> {
    let prm = &variant.params;
    let half = T::lit(0.5);
    let w = grid.cell_volume() / T::lit(8.0);
    let grads = displacement_gradient(grid, &state.u);
    let ps = interpolate_tensor(grid, &state.p);
    let curls = discrete_curl(grid, &state.p);
    let mut e = EnergySplit::default();
    for c in 0..grid.cell_count() {
        for g in 0..8 {
            let ee = grads[c][g] - ps[c][g];
            e.elastic += w * half * elasticity_apply(prm, &ee).inner(&ee.sym());
            e.defect += w * half * prm.mu * prm.lc * prm.lc * curls[c][g].inner(&curls[c][g]);
            if variant.tag.is_kinematic() {
                let ds = ps[c][g].sym().dev();
                e.hardening += w * half * prm.mu * prm.k1 * ds.inner(&ds);
            }
        }
    }
    let weights = grid.nodal_weights();
    if variant.tag.is_isotropic() {
        for (wj, gj) in weights.iter().zip(&state.gamma.values) {
            e.hardening += *wj * half * prm.mu * prm.k2 * *gj * *gj;
        }
    }
    for (wj, uj) in weights.iter().zip(&state.u.values) {
        e.load -= *wj * (body_force[0] * uj[0] + body_force[1] * uj[1] + body_force[2] * uj[2]);
    }
    e
}

/// Nodal Eshelby-type stress `Σ_E = σ − μk₁ dev sym p − μL_c² Curl Curl p`
/// (the backstress term only for kinematic variants), recovered weakly: the
/// residual `∫⟨σ, N_j E⟩ − μk₁∫⟨dev sym p, N_j E⟩ − μL_c²∫⟨Curl p, Curl(N_j E)⟩`
/// for every unit tensor `E`, divided by the lumped weight `∫ N_j`.
pub fn eshelby_stress<T: Real>(
    variant: &ModelVariant<T>,
    grid: &Grid<T>,
    state: &SimState<T>,
) -> TensorField<T> {
    let prm = &variant.params;
    let shape = ShapeData::new(grid.h);
    let sig = cauchy_stress(variant, grid, &state.u, &state.p);
    let ps = interpolate_tensor(grid, &state.p);
    let curls = discrete_curl(grid, &state.p);
    let c_curl = prm.mu * prm.lc * prm.lc;
    let c_kin = if variant.tag.is_kinematic() { prm.mu * prm.k1 } else { T::zero() };
    let mut acc = vec![Mat3::zero(); grid.node_count()];
    for cell in 0..grid.cell_count() {
        let nodes = grid.cell_nodes(cell);
        for g in 0..8 {
            let local = sig[cell][g] - ps[cell][g].sym().dev() * c_kin;
            for a in 0..8 {
                let wn = shape.weight * shape.values[g][a];
                let mut r = local * wn;
                let dn = shape.gradients[g][a];
                // ⟨Curl p, Curl(N E_ik)⟩ = ⟨(Curl p)_i, ∇N × e_k⟩
                for i in 0..3 {
                    let ci = curls[cell][g].row(i);
                    for k in 0..3 {
                        let mut ek = [T::zero(); 3];
                        ek[k] = T::one();
                        let t = cross(&dn, &ek);
                        r.0[i][k] -= shape.weight * c_curl * (ci[0] * t[0] + ci[1] * t[1] + ci[2] * t[2]);
                    }
                }
                acc[nodes[a]] += r;
            }
        }
    }
    let weights = grid.nodal_weights();
    TensorField {
        values: acc.into_iter().zip(weights).map(|(r, w)| r * (T::one() / w)).collect(),
    }
}

/// Yield function: `|dev Σ_E| − σ_y` for spin variants, `|dev sym Σ_E| − σ_y`
/// for irrotational ones, with the radius enlarged by `μk₂γ` under isotropic
/// hardening. Elastic when `≤ 0`.
pub fn yield_value<T: Real>(variant: &ModelVariant<T>, sigma_e: &Mat3<T>, gamma: T) -> T {
    let prm = &variant.params;
    let driving = if variant.tag.is_irrotational() {
        sigma_e.sym().dev()
    } else {
        sigma_e.dev()
    };
    let mut radius = prm.sigma_y;
    if variant.tag.is_isotropic() {
        radius += prm.mu * prm.k2 * gamma;
    }
    driving.norm() - radius
}

/// Dissipation of a plastic increment `dq` with `γ` eliminated by `δγ = |δp|`.
pub fn incremental_dissipation<T: Real>(variant: &ModelVariant<T>, dq: &Mat3<T>, gamma_prev: T) -> T {
    dissipation_of_norm(variant, dq.norm(), gamma_prev)
}

/// [`incremental_dissipation`] as a function of `|dq|`.
pub fn dissipation_of_norm<T: Real>(variant: &ModelVariant<T>, norm: T, gamma_prev: T) -> T {
    let prm = &variant.params;
    match variant.tag {
        VariantTag::Micromorphic => T::zero(),
        VariantTag::KinSpin | VariantTag::KinIrrot => prm.sigma_y * norm,
        VariantTag::IsoSpin | VariantTag::IsoIrrot => {
            let g1 = gamma_prev + norm;
            prm.sigma_y * norm + T::lit(0.5) * prm.mu * prm.k2 * (g1 * g1 - gamma_prev * gamma_prev)
        }
    }
}
