//! Incremental solution of the variational inequality.
//!
//! Each load step minimizes
//! `J(u, p) = ½ a((u,p),(u,p)) − ⟨ℓ, u⟩ + Σ_j w_j D_inc(p_j − p_prev,j, γ_prev,j)`
//! over admissible `(u, p)`. The displacement enters quadratically, so it is
//! eliminated exactly: every iterate `p` is paired with the CG solution
//! `u*(p)` of the elastic problem, and accelerated proximal gradient (FISTA)
//! runs on the reduced functional `F(p) = min_u J(u, p)`. Because `u*` is
//! affine in `p`, the displacement at an extrapolated point is the same
//! extrapolation of displacements, so each iteration costs one warm-started
//! CG solve. The prox of the lumped dissipation is an exact per-node
//! shrinkage in the orthonormal coefficient basis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_all, joint_matrix, AssembledBlocks, Discretization};
use crate::error::{Error, Result};
use crate::grid::{BoundaryConfig, Grid, ScalarField, TensorField, VectorField};
use crate::linalg::{dot, pcg, power_iteration, CgInfo};
use crate::models::{dissipation_of_norm, eshelby_stress, total_energy, EnergySplit, ModelVariant, SimState, VariantTag};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::tensor::{Mat3, Vec3};

/// Tolerances and iteration caps.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Time increment per step; the last entry repeats, empty means 1.
    pub dt_schedule: Vec<T>,
    /// Relative change of the incremental energy between iterations.
    pub tol_outer: T,
    /// Relative residual of the CG solves.
    pub tol_cg: T,
    /// Fixed-point residual of the proximal iteration, relative to `σ_y`.
    pub tol_fista: T,
    /// Cap on iterations of the reduced (u eliminated) proximal scheme.
    pub max_outer: usize,
    pub max_cg: usize,
    /// Cap on iterations of [`solve_p`].
    pub max_fista: usize,
    /// Multiplier on the power-iteration estimate of the step bound.
    pub lipschitz_safety: T,
    pub power_iterations: usize,
    /// Random probes of the VI residual in each step report (0 disables).
    pub vi_probes: usize,
    pub seed: u64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            dt_schedule: Vec::new(),
            tol_outer: T::lit(1e-10),
            tol_cg: T::lit(1e-10),
            tol_fista: T::lit(1e-9),
            max_outer: 20_000,
            max_cg: 5_000,
            max_fista: 20_000,
            lipschitz_safety: T::lit(1.1),
            power_iterations: 30,
            vi_probes: 20,
            seed: 0x5eed,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_outer", self.tol_outer),
            ("tol_cg", self.tol_cg),
            ("tol_fista", self.tol_fista),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("max_outer", self.max_outer),
            ("max_cg", self.max_cg),
            ("max_fista", self.max_fista),
            ("power_iterations", self.power_iterations),
        ] {
            if v == 0 {
                return Err(Error::InvalidParams(format!("{name} must be at least 1")));
            }
        }
        if !(self.lipschitz_safety >= T::one()) || !self.lipschitz_safety.is_finite() {
            return Err(Error::InvalidParams("lipschitz_safety must be >= 1".into()));
        }
        if self.dt_schedule.iter().any(|dt| !(*dt > T::zero()) || !dt.is_finite()) {
            return Err(Error::InvalidParams("time steps must be positive".into()));
        }
        Ok(())
    }

    /// Time increment of step `k` (zero based).
    pub fn dt(&self, k: usize) -> T {
        self.dt_schedule
            .get(k)
            .or(self.dt_schedule.last())
            .copied()
            .unwrap_or_else(T::one)
    }
}

/// Load data of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadStep<T> {
    /// Amplitude of the affine Dirichlet program.
    pub level: T,
    /// Constant body force.
    pub body_force: Vec3<T>,
    pub dt: T,
}

impl<T: Real> LoadStep<T> {
    pub fn displacement(level: T) -> Self {
        LoadStep {
            level,
            body_force: [T::zero(); 3],
            dt: T::one(),
        }
    }
}

/// Diagnostics of a converged step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport<T> {
    pub energy: EnergySplit<T>,
    /// `Σ_j w_j σ_y |δp_j|`.
    pub dissipation_increment: T,
    /// `Σ_j w_j ⟨Σ_E,j, δp_j⟩`.
    pub plastic_work: T,
    pub vi_residual: Option<T>,
    pub kkt_max_violation: T,
    /// Largest angle between `δp_j` and the driving stress on active nodes.
    pub max_flow_angle: T,
    pub active_node_fraction: T,
    /// Largest nodal driving stress `|dev Σ_E|` (`|dev sym Σ_E|` if irrotational).
    pub max_driving_stress: T,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    /// Largest increase of the incremental energy between accepted iterates.
    pub max_energy_increase: T,
}

/// Assembled operators of one boundary-value problem.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub variant: ModelVariant<T>,
    pub disc: Discretization<T>,
    pub blocks: AssembledBlocks<T>,
    /// `A_p` of the plastic subproblem.
    pub a_p: CsrMatrix<T>,
    /// `K_upᵀ`.
    pub kpu: CsrMatrix<T>,
    /// Lumped weight per plastic coefficient.
    pub weights: Vec<T>,
    /// Power-iteration estimate of `λ_max(W⁻¹ A_p)`.
    pub lambda_max: T,
    u_inv_diag: Vec<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(
        variant: ModelVariant<T>,
        grid: Grid<T>,
        boundary: BoundaryConfig<T>,
        config: &SolverConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        let disc = Discretization::new(grid, boundary, variant.space());
        let blocks = assemble_all(&disc, &variant.params);
        let a_p = blocks.plastic_operator(&variant.params, variant.defect_form, variant.tag.is_kinematic())?;
        let kpu = blocks.kup.transpose();
        let weights = disc.p_weights();
        let lambda_max = power_iteration(|v, out| a_p.mul_vec(v, out), &weights, config.power_iterations, config.seed);
        let u_inv_diag = blocks
            .kuu
            .diagonal()
            .iter()
            .enumerate()
            .map(|(d, k)| if disc.u_layout.is_free(d) { T::one() / *k } else { T::one() })
            .collect();
        Ok(Problem {
            variant,
            disc,
            blocks,
            a_p,
            kpu,
            weights,
            lambda_max,
            u_inv_diag,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.disc.grid
    }

    /// Stress unit of the fixed-point tolerance.
    pub fn stress_scale(&self) -> T {
        let s = self.variant.params.sigma_y;
        if s.is_finite() && s > T::zero() {
            s
        } else {
            self.variant.params.mu
        }
    }

    /// Plastic coefficients of a nodal field.
    pub fn coefficients(&self, p: &TensorField<T>) -> Vec<T> {
        self.disc.p_layout.project_field(p)
    }

    pub fn field(&self, x: &[T]) -> TensorField<T> {
        self.disc.p_layout.to_field(x)
    }

    fn load_vectors(&self, load: &LoadStep<T>) -> Result<(Vec<T>, Vec<T>)> {
        if !load.level.is_finite() || load.body_force.iter().any(|f| !f.is_finite()) {
            return Err(Error::InfeasibleBc(format!(
                "non-finite load data (level {}, body force {:?})",
                load.level, load.body_force
            )));
        }
        Ok((self.disc.dirichlet_lift(load.level), self.disc.body_force_vector(load.body_force)))
    }

    /// Solves `K_uu u = f − K_up p` on the free dofs with `u = lift` on Γ.
    fn u_solve(
        &self,
        x: &[T],
        lift: &[T],
        f: &[T],
        warm: Option<&[T]>,
        tol: T,
        max_iter: usize,
    ) -> Result<(Vec<T>, CgInfo)> {
        let layout = &self.disc.u_layout;
        let nu = self.disc.nu();
        let mut rhs = self.blocks.kuu.apply(lift);
        let kx = self.blocks.kup.apply(x);
        for d in 0..nu {
            rhs[d] = f[d] - rhs[d] - kx[d];
        }
        layout.mask(&mut rhs);
        let mut v: Vec<T> = match warm {
            Some(w) => w.iter().zip(lift).map(|(a, b)| *a - *b).collect(),
            None => vec![T::zero(); nu],
        };
        layout.mask(&mut v);
        let free = layout.free_mask();
        let kuu = &self.blocks.kuu;
        let info = pcg(
            |s, out| {
                kuu.mul_vec(s, out);
                for d in 0..out.len() {
                    if !free[d] {
                        out[d] = s[d];
                    }
                }
            },
            &self.u_inv_diag,
            &rhs,
            &mut v,
            tol,
            max_iter,
        )?;
        for d in 0..nu {
            v[d] += lift[d];
        }
        Ok((v, info))
    }

    /// `∂J/∂u` restricted to the free dofs (zero on Γ).
    fn u_gradient(&self, u: &[T], x: &[T], f: &[T]) -> Vec<T> {
        let mut g = self.blocks.kuu.apply(u);
        let kx = self.blocks.kup.apply(x);
        for d in 0..g.len() {
            g[d] += kx[d] - f[d];
        }
        self.disc.u_layout.mask(&mut g);
        g
    }

    /// `∂J_smooth/∂p = K_upᵀ u + A_p p`.
    fn p_gradient(&self, u: &[T], x: &[T]) -> Vec<T> {
        let mut g = self.kpu.apply(u);
        let ax = self.a_p.apply(x);
        for (gi, ai) in g.iter_mut().zip(ax) {
            *gi += ai;
        }
        g
    }

    /// Smooth part `½uᵀK_uu u + uᵀK_up p + ½pᵀA_p p − fᵀu`.
    fn smooth_energy(&self, u: &[T], x: &[T], f: &[T]) -> T {
        let half = T::lit(0.5);
        half * self.blocks.kuu.quad_form(u) + dot(&self.kpu.apply(u), x) + half * self.a_p.quad_form(x) - dot(f, u)
    }

    /// Nodal driving stress in coefficient form, `−(∂J_smooth/∂p)/w`: the
    /// projection of `Σ_E` onto each node's admissible subspace.
    pub fn driving_stress(&self, u: &[T], x: &[T]) -> Vec<T> {
        self.p_gradient(u, x)
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| -*g / *w)
            .collect()
    }

    /// Lumped dissipation `Σ_j w_j D_inc(x_j − x_prev,j, γ_prev,j)`.
    pub fn dissipation_functional(&self, x: &[T], x_prev: &[T], gamma_prev: &[T]) -> T {
        let layout = &self.disc.p_layout;
        let mut s = T::zero();
        for node in 0..layout.node_count() {
            let r = layout.node_dofs(node);
            if r.is_empty() {
                continue;
            }
            let n = r.clone().map(|k| (x[k] - x_prev[k]) * (x[k] - x_prev[k])).sum::<T>().sqrt();
            s += self.disc.nodal_weights[node] * dissipation_of_norm(&self.variant, n, gamma_prev[node]);
        }
        s
    }

    /// Per-node prox step `x = x_prev + prox_{τ D}(z − x_prev)`.
    fn prox(&self, z: &[T], x_prev: &[T], gamma_prev: &[T], tau: T) -> Vec<T> {
        let layout = &self.disc.p_layout;
        let mut out = vec![T::zero(); z.len()];
        for node in 0..layout.node_count() {
            let r = layout.node_dofs(node);
            if r.is_empty() {
                continue;
            }
            let norm = r.clone().map(|k| (z[k] - x_prev[k]) * (z[k] - x_prev[k])).sum::<T>().sqrt();
            let m = prox_magnitude(&self.variant, norm, tau, gamma_prev[node]);
            let scale = if norm > T::zero() { m / norm } else { T::zero() };
            for k in r {
                out[k] = x_prev[k] + (z[k] - x_prev[k]) * scale;
            }
        }
        out
    }

    fn node_max_norm(&self, v: &[T]) -> T {
        let layout = &self.disc.p_layout;
        (0..layout.node_count())
            .map(|n| layout.node_norm(v, n))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Magnitude of the prox of `τ D_inc` applied to a tensor of norm `norm`.
fn prox_magnitude<T: Real>(variant: &ModelVariant<T>, norm: T, tau: T, gamma_prev: T) -> T {
    let prm = &variant.params;
    match variant.tag {
        VariantTag::Micromorphic => norm,
        VariantTag::KinSpin | VariantTag::KinIrrot => {
            let t = tau * prm.sigma_y;
            // closed ball: |z| = τσ_y maps to zero
            if norm <= t {
                T::zero()
            } else {
                norm - t
            }
        }
        VariantTag::IsoSpin | VariantTag::IsoIrrot => {
            let h = tau * prm.mu * prm.k2;
            let excess = norm - tau * prm.sigma_y - h * gamma_prev;
            if excess <= T::zero() {
                T::zero()
            } else {
                excess / (T::one() + h)
            }
        }
    }
}

/// Proximal map of `τ D_inc(·, γ_prev)`: shrinkage along `z`.
pub fn prox_dissipation<T: Real>(variant: &ModelVariant<T>, z: &Mat3<T>, tau: T, gamma_prev: T) -> Mat3<T> {
    let n = z.norm();
    if n == T::zero() {
        return Mat3::zero();
    }
    *z * (prox_magnitude(variant, n, tau, gamma_prev) / n)
}

/// Displacement for fixed plastic coefficients.
pub fn solve_u<T: Real>(
    problem: &Problem<T>,
    x: &[T],
    load: &LoadStep<T>,
    warm: Option<&[T]>,
    config: &SolverConfig<T>,
) -> Result<(VectorField<T>, CgInfo)> {
    let (lift, f) = problem.load_vectors(load)?;
    let (u, info) = problem.u_solve(x, &lift, &f, warm, config.tol_cg, config.max_cg)?;
    Ok((VectorField::from_flat(&u), info))
}

struct FistaOutcome<T> {
    x: Vec<T>,
    u: Vec<T>,
    iterations: usize,
    cg_iterations: usize,
    max_increase: T,
}

/// Smooth part of the p-subproblem.
enum Smooth<'a, T> {
    /// u eliminated by exact solves.
    Reduced { lift: &'a [T], f: &'a [T] },
    /// u held fixed.
    Fixed { u: &'a [T] },
}

impl<'a, T: Real> Smooth<'a, T> {
    fn pair(&self, problem: &Problem<T>, x: &[T], warm: &[T], cfg: &SolverConfig<T>) -> Result<(Vec<T>, usize)> {
        match self {
            Smooth::Reduced { lift, f } => {
                let (u, info) = problem.u_solve(x, lift, f, Some(warm), cfg.tol_cg, cfg.max_cg)?;
                Ok((u, info.iterations))
            }
            Smooth::Fixed { u } => Ok((u.to_vec(), 0)),
        }
    }

    fn energy(&self, problem: &Problem<T>, u: &[T], x: &[T]) -> T {
        match self {
            Smooth::Reduced { f, .. } => problem.smooth_energy(u, x, f),
            Smooth::Fixed { .. } => {
                dot(&problem.kpu.apply(u), x) + T::lit(0.5) * problem.a_p.quad_form(x)
            }
        }
    }
}

fn fista<T: Real>(
    problem: &Problem<T>,
    smooth: &Smooth<'_, T>,
    x0: Vec<T>,
    u0: Vec<T>,
    x_prev: &[T],
    gamma_prev: &[T],
    max_iter: usize,
    cfg: &SolverConfig<T>,
) -> Result<FistaOutcome<T>> {
    let scale = problem.stress_scale();
    let tol_res = cfg.tol_fista * scale;
    let mut lip = problem.lambda_max * cfg.lipschitz_safety;
    if !(lip > T::zero()) {
        lip = problem.variant.params.mu;
    }
    let (mut u, mut cg_total) = smooth.pair(problem, &x0, &u0, cfg)?;
    let mut x = x0;
    let objective = |u: &[T], x: &[T]| {
        let s = smooth.energy(problem, u, x);
        let j = problem.dissipation_functional(x, x_prev, gamma_prev);
        (s + j, s.abs() + j.abs())
    };
    let (mut obj, mut mag) = objective(&u, &x);
    let mut x_old = x.clone();
    let mut u_old = u.clone();
    let mut t = T::one();
    let mut max_increase = T::zero();
    let round = T::lit(1e-12);
    for it in 1..=max_iter {
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
        let beta = (t - T::one()) / t_next;
        let y: Vec<T> = x.iter().zip(&x_old).map(|(a, b)| *a + beta * (*a - *b)).collect();
        let uy: Vec<T> = u.iter().zip(&u_old).map(|(a, b)| *a + beta * (*a - *b)).collect();
        let step = |yv: &[T], uv: &[T]| {
            let g = problem.p_gradient(uv, yv);
            let z: Vec<T> = yv
                .iter()
                .zip(&g)
                .zip(&problem.weights)
                .map(|((yi, gi), wi)| *yi - *gi / (lip * *wi))
                .collect();
            problem.prox(&z, x_prev, gamma_prev, T::one() / lip)
        };
        let mut x_new = step(&y, &uy);
        let (mut u_new, cg) = smooth.pair(problem, &x_new, &uy, cfg)?;
        cg_total += cg;
        let (mut obj_new, mut mag_new) = objective(&u_new, &x_new);
        let mut from = y;
        let tol_mono = round * (mag + mag_new);
        t = t_next;
        if obj_new > obj + tol_mono {
            // momentum overshoot: plain step from the current iterate
            t = T::one();
            let xp = step(&x, &u);
            let (up, cg) = smooth.pair(problem, &xp, &u, cfg)?;
            cg_total += cg;
            let (op, mp) = objective(&up, &xp);
            let diff: Vec<T> = x.iter().zip(&xp).map(|(a, b)| *a - *b).collect();
            let res = lip * problem.node_max_norm(&diff);
            if op > obj + round * (mag + mp) {
                if res <= tol_res {
                    return Ok(FistaOutcome {
                        x,
                        u,
                        iterations: it,
                        cg_iterations: cg_total,
                        max_increase,
                    });
                }
                lip = lip * T::lit(2.0);
                x_old = x.clone();
                u_old = u.clone();
                continue;
            }
            x_new = xp;
            u_new = up;
            obj_new = op;
            mag_new = mp;
            from = x.clone();
        }
        max_increase = max_increase.max(obj_new - obj);
        let diff: Vec<T> = from.iter().zip(&x_new).map(|(a, b)| *a - *b).collect();
        let res = lip * problem.node_max_norm(&diff);
        // gradient-based adaptive restart
        let restart = from
            .iter()
            .zip(&x_new)
            .zip(&x)
            .map(|((yi, xn), xo)| (*yi - *xn) * (*xn - *xo))
            .sum::<T>()
            > T::zero();
        if restart {
            t = T::one();
        }
        let change = (obj_new - obj).abs();
        x_old = std::mem::replace(&mut x, x_new);
        u_old = std::mem::replace(&mut u, u_new);
        obj = obj_new;
        mag = mag_new;
        let small_change = change <= cfg.tol_outer * mag.max(T::min_positive_value());
        if res <= tol_res && small_change {
            return Ok(FistaOutcome {
                x,
                u,
                iterations: it,
                cg_iterations: cg_total,
                max_increase,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "proximal gradient",
        iterations: max_iter,
        residual: obj.to_f64().unwrap_or(f64::NAN),
    })
}

/// Plastic coefficients minimizing `J(u, ·)` for fixed `u` (a full
/// displacement vector including Dirichlet values).
pub fn solve_p<T: Real>(
    problem: &Problem<T>,
    u: &[T],
    x_prev: &[T],
    gamma_prev: &[T],
    config: &SolverConfig<T>,
) -> Result<(Vec<T>, usize)> {
    let smooth = Smooth::Fixed { u };
    let out = fista(problem, &smooth, x_prev.to_vec(), u.to_vec(), x_prev, gamma_prev, config.max_fista, config)?;
    Ok((out.x, out.iterations))
}

/// Nodal complementarity diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktReport<T> {
    /// Inactive nodes: `max(0, |s| − r)`; active nodes: `||s| − r|`.
    pub max_violation: T,
    pub max_angle: T,
    pub active_fraction: T,
    pub max_driving_stress: T,
}

/// Checks `|s_j| ≤ r_j`, `|δp_j| (|s_j| − r_j) = 0` and alignment of `δp_j`
/// with the driving stress `s_j` at every node carrying plastic unknowns.
pub fn kkt_check<T: Real>(
    problem: &Problem<T>,
    u: &[T],
    x: &[T],
    x_prev: &[T],
    gamma_prev: &[T],
) -> KktReport<T> {
    let layout = &problem.disc.p_layout;
    let s = problem.driving_stress(u, x);
    let prm = &problem.variant.params;
    let mut rep = KktReport::<T>::default();
    let mut active = 0usize;
    let mut carrying = 0usize;
    for node in 0..layout.node_count() {
        let r = layout.node_dofs(node);
        if r.is_empty() {
            continue;
        }
        carrying += 1;
        let sn = r.clone().map(|k| s[k] * s[k]).sum::<T>().sqrt();
        let dn = r.clone().map(|k| (x[k] - x_prev[k]) * (x[k] - x_prev[k])).sum::<T>().sqrt();
        rep.max_driving_stress = rep.max_driving_stress.max(sn);
        let mut radius = prm.sigma_y;
        if problem.variant.tag.is_isotropic() {
            radius += prm.mu * prm.k2 * (gamma_prev[node] + dn);
        }
        if dn <= T::lit(1e-12) {
            rep.max_violation = rep.max_violation.max(sn - radius);
        } else {
            active += 1;
            rep.max_violation = rep.max_violation.max((sn - radius).abs());
            let c = r.map(|k| s[k] * (x[k] - x_prev[k])).sum::<T>() / (sn * dn);
            let angle = c.max(-T::one()).min(T::one()).acos();
            rep.max_angle = rep.max_angle.max(angle);
        }
    }
    rep.max_violation = rep.max_violation.max(T::zero());
    if carrying > 0 {
        rep.active_fraction = T::count(active) / T::count(carrying);
    }
    rep
}

/// Plastic multiplier `λ_j = |δp_j| / Δt`.
pub fn plastic_multiplier<T: Real>(prev: &SimState<T>, next: &SimState<T>, dt: T) -> ScalarField<T> {
    ScalarField {
        values: prev
            .p
            .values
            .iter()
            .zip(&next.p.values)
            .map(|(a, b)| (*b - *a).norm() / dt)
            .collect(),
    }
}

/// One load step.
pub fn time_step<T: Real>(
    problem: &Problem<T>,
    prev: &SimState<T>,
    load: &LoadStep<T>,
    config: &SolverConfig<T>,
) -> Result<(SimState<T>, StepReport<T>)> {
    config.validate()?;
    let (lift, f) = problem.load_vectors(load)?;
    let x_prev = problem.coefficients(&prev.p);
    let gamma_prev = &prev.gamma.values;
    let u_prev = prev.u.as_flat();

    let (x, u, outer, cg, max_increase) = if problem.variant.tag == VariantTag::Micromorphic {
        let (u, x, info) = solve_monolithic(problem, &lift, &f, &u_prev, &x_prev, config)?;
        (x, u, 1, info.iterations, T::zero())
    } else if problem.disc.np() == 0 {
        let (u, info) = problem.u_solve(&x_prev, &lift, &f, Some(&u_prev), config.tol_cg, config.max_cg)?;
        (x_prev.clone(), u, 0, info.iterations, T::zero())
    } else {
        let smooth = Smooth::Reduced { lift: &lift, f: &f };
        let out = fista(problem, &smooth, x_prev.clone(), u_prev.clone(), &x_prev, gamma_prev, config.max_outer, config)?;
        (out.x, out.u, out.iterations, out.cg_iterations, out.max_increase)
    };

    let layout = &problem.disc.p_layout;
    let mut gamma = gamma_prev.clone();
    let mut dissipation = T::zero();
    if problem.variant.tag.has_flow_rule() {
        for node in 0..layout.node_count() {
            let r = layout.node_dofs(node);
            let dn = r.map(|k| (x[k] - x_prev[k]) * (x[k] - x_prev[k])).sum::<T>().sqrt();
            gamma[node] += dn;
            dissipation += problem.disc.nodal_weights[node] * problem.variant.params.sigma_y * dn;
        }
    }
    let s = problem.driving_stress(&u, &x);
    let plastic_work = (0..x.len())
        .map(|k| problem.weights[k] * s[k] * (x[k] - x_prev[k]))
        .sum::<T>();
    let kkt = if problem.variant.tag.has_flow_rule() {
        kkt_check(problem, &u, &x, &x_prev, gamma_prev)
    } else {
        KktReport::default()
    };

    let state = SimState {
        u: VectorField::from_flat(&u),
        p: problem.field(&x),
        gamma: ScalarField { values: gamma },
        t: prev.t + load.dt,
    };
    let energy = total_energy(&problem.variant, problem.grid(), &state, load.body_force);
    let sigma_e = eshelby_stress(&problem.variant, problem.grid(), &state);
    let max_driving_stress = sigma_e
        .values
        .iter()
        .map(|m| if problem.variant.tag.is_irrotational() { m.sym().dev().norm() } else { m.dev().norm() })
        .fold(T::zero(), |a, b| a.max(b));
    let vi = if config.vi_probes > 0 && problem.variant.tag.has_flow_rule() {
        Some(vi_residual(problem, &state, prev, load, config.vi_probes, config.seed)?)
    } else {
        None
    };
    let report = StepReport {
        energy,
        dissipation_increment: dissipation,
        plastic_work,
        vi_residual: vi,
        kkt_max_violation: kkt.max_violation,
        max_flow_angle: kkt.max_angle,
        active_node_fraction: kkt.active_fraction,
        max_driving_stress,
        outer_iterations: outer,
        cg_iterations: cg,
        max_energy_increase: max_increase,
    };
    Ok((state, report))
}

/// Joint SPD solve of the micromorphic system in `(u_free, p)`.
fn solve_monolithic<T: Real>(
    problem: &Problem<T>,
    lift: &[T],
    f: &[T],
    u_prev: &[T],
    x_prev: &[T],
    config: &SolverConfig<T>,
) -> Result<(Vec<T>, Vec<T>, CgInfo)> {
    let disc = &problem.disc;
    let jm = joint_matrix(disc, &problem.blocks, &problem.variant.params, problem.variant.defect_form)?;
    let free = disc.u_layout.free_dofs();
    let nf = free.len();
    let np = disc.np();
    let kl = problem.blocks.kuu.apply(lift);
    let pl = problem.kpu.apply(lift);
    let mut rhs = vec![T::zero(); nf + np];
    let mut z = vec![T::zero(); nf + np];
    for (k, &d) in free.iter().enumerate() {
        rhs[k] = f[d] - kl[d];
        z[k] = u_prev[d];
    }
    for k in 0..np {
        rhs[nf + k] = -pl[k];
        z[nf + k] = x_prev[k];
    }
    let inv: Vec<T> = jm.diagonal().iter().map(|d| T::one() / *d).collect();
    let info = pcg(|v, out| jm.mul_vec(v, out), &inv, &rhs, &mut z, config.tol_cg, config.max_cg.max(10 * (nf + np)))?;
    let mut u = lift.to_vec();
    for (k, &d) in free.iter().enumerate() {
        u[d] = z[k];
    }
    Ok((u, z[nf..].to_vec(), info))
}

/// Weak residual of the microbalance `σ − μk₁ dev sym p − μL_c² Curl Curl p = 0`
/// tested against every admissible plastic basis function, and the norm of
/// the load vector it should be compared with.
pub fn microbalance_residual<T: Real>(problem: &Problem<T>, state: &SimState<T>, load: &LoadStep<T>) -> Result<(T, T)> {
    let (lift, f) = problem.load_vectors(load)?;
    let sigma_e = eshelby_stress(&problem.variant, problem.grid(), state);
    let layout = &problem.disc.p_layout;
    let mut worst = T::zero();
    for node in 0..layout.node_count() {
        let w = problem.disc.nodal_weights[node];
        for b in layout.node_basis(node) {
            worst = worst.max((w * sigma_e.values[node].inner(b)).abs());
        }
    }
    let mut load_vec = f;
    let kl = problem.blocks.kuu.apply(&lift);
    for (a, b) in load_vec.iter_mut().zip(kl) {
        *a = *a - b;
    }
    problem.disc.u_layout.mask(&mut load_vec);
    let lp = problem.kpu.apply(&lift);
    let load_norm = (dot(&load_vec, &load_vec) + dot(&lp, &lp)).sqrt();
    Ok((worst, load_norm))
}

/// Smallest normalized value of the discrete variational inequality
/// `⟨∂J_smooth(w), d⟩ + j(δp + d_p) − j(δp) ≥ 0` over random admissible
/// directions `d`. Each value is divided by the sum of the magnitudes of its
/// terms plus the energy scale of the state, so the result is dimensionless;
/// a converged minimizer gives values above `−tol`.
pub fn vi_residual<T: Real>(
    problem: &Problem<T>,
    state: &SimState<T>,
    prev: &SimState<T>,
    load: &LoadStep<T>,
    probes: usize,
    seed: u64,
) -> Result<T> {
    let (_, f) = problem.load_vectors(load)?;
    let u = state.u.as_flat();
    let x = problem.coefficients(&state.p);
    let x_prev = problem.coefficients(&prev.p);
    let gamma_prev = &prev.gamma.values;
    let gu = problem.u_gradient(&u, &x, &f);
    let gp = problem.p_gradient(&u, &x);
    let j0 = problem.dissipation_functional(&x, &x_prev, gamma_prev);
    let energy = problem.smooth_energy(&u, &x, &f).abs() + j0.abs();
    let u_amp = u.iter().fold(T::zero(), |a, b| a.max(b.abs())).max(T::lit(1e-300));
    let p_amp = x
        .iter()
        .zip(&x_prev)
        .fold(T::zero(), |a, (b, c)| a.max(b.abs()).max((*b - *c).abs()))
        .max(T::lit(1e-300));
    let free = problem.disc.u_layout.free_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::infinity();
    for k in 0..probes {
        let amp = if (k / 3) % 2 == 0 { T::one() } else { T::lit(1e-2) };
        let (use_u, use_p) = match k % 3 {
            0 => (true, true),
            1 => (true, false),
            _ => (false, true),
        };
        let mut lin = T::zero();
        let mut trial = x.clone();
        if use_u {
            for d in 0..u.len() {
                if free[d] {
                    lin += gu[d] * T::lit(rng.gen_range(-1.0..1.0)) * amp * u_amp;
                }
            }
        }
        if use_p {
            for (i, t) in trial.iter_mut().enumerate() {
                let dp = T::lit(rng.gen_range(-1.0..1.0)) * amp * p_amp;
                lin += gp[i] * dp;
                *t += dp;
            }
        }
        let j1 = problem.dissipation_functional(&trial, &x_prev, gamma_prev);
        let v = lin + j1 - j0;
        let denom = lin.abs() + j1.abs() + j0.abs() + energy;
        let val = if denom > T::zero() { v / denom } else { T::zero() };
        worst = worst.min(val);
    }
    Ok(if probes == 0 { T::zero() } else { worst })
}

/// Runs a sequence of load steps from the virgin state.
pub fn run_program<T: Real>(
    problem: &Problem<T>,
    loads: &[LoadStep<T>],
    config: &SolverConfig<T>,
) -> Result<Vec<(SimState<T>, StepReport<T>)>> {
    let mut state = SimState::zero(problem.grid());
    let mut out = Vec::with_capacity(loads.len());
    for load in loads {
        let (next, rep) = time_step(problem, &state, load, config)?;
        state = next.clone();
        out.push((next, rep));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Face, FaceSet};
    use crate::oracles::brute_force_min_1d;
    use crate::tensor::MaterialParams;

    fn kin(lc: f64) -> ModelVariant<f64> {
        ModelVariant::new(VariantTag::KinSpin, MaterialParams::new(1.0, 1.5, 0.5, 0.0, lc, 0.01).unwrap()).unwrap()
    }

    fn shear_problem(variant: ModelVariant<f64>, n: usize) -> Problem<f64> {
        let grid = Grid::unit_cube(n);
        let gamma = FaceSet::from_faces([Face::new(1, false), Face::new(1, true)]);
        let bc = BoundaryConfig::new(gamma, Mat3::unit(0, 1)).unwrap();
        Problem::new(variant, grid, bc, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn prox_cases() {
        let v = kin(0.0);
        let tau = 2.0;
        let n = (Mat3::unit(0, 1) + Mat3::unit(1, 0)) * (1.0 / 2f64.sqrt());
        let ts = tau * v.params.sigma_y;
        assert_eq!(prox_dissipation(&v, &(n * ts), tau, 0.0), Mat3::zero());
        assert_eq!(prox_dissipation(&v, &(n * (0.5 * ts)), tau, 0.0), Mat3::zero());
        let p = prox_dissipation(&v, &(n * (2.0 * ts)), tau, 0.0);
        assert!((p - n * ts).max_abs() < 1e-15);
    }

    #[test]
    fn isotropic_prox_matches_scalar_brute_force() {
        let v = ModelVariant::new(VariantTag::IsoSpin, MaterialParams::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.3).unwrap()).unwrap();
        let tau = 0.7;
        for (zn, g) in [(2.0 * tau * 0.3 + tau, 0.0), (1.5, 0.4), (0.1, 0.0)] {
            let m = prox_magnitude(&v, zn, tau, g);
            let obj = |r: f64| 0.5 * (r - zn).powi(2) + tau * dissipation_of_norm(&v, r, g);
            let r = brute_force_min_1d(obj, 0.0, zn + 1.0, 1e-10);
            assert!((m - r).abs() < 1e-8, "{m} vs {r}");
        }
    }

    #[test]
    fn zero_load_keeps_zero_state() {
        let pb = shear_problem(kin(0.2), 2);
        let (s, r) = time_step(&pb, &SimState::zero(pb.grid()), &LoadStep::displacement(0.0), &SolverConfig::default()).unwrap();
        assert_eq!(s, SimState { t: 1.0, ..SimState::zero(pb.grid()) });
        assert_eq!(r.dissipation_increment, 0.0);
    }

    #[test]
    fn elastic_step_leaves_p_unchanged() {
        let yf = FaceSet::from_faces([Face::new(1, false), Face::new(1, true)]);
        let bc = BoundaryConfig::with_micro_hard(FaceSet::all(), Mat3::unit(0, 1), yf).unwrap();
        let pb = Problem::new(kin(0.2), Grid::unit_cube(3), bc, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig::default();
        let (s, r) = time_step(&pb, &SimState::zero(pb.grid()), &LoadStep::displacement(0.002), &cfg).unwrap();
        assert_eq!(s.p.max_norm(), 0.0);
        assert_eq!(r.active_node_fraction, 0.0);
        // affine shear is reproduced exactly
        for (node, v) in s.u.values.iter().enumerate() {
            let x = pb.grid().node_position(node);
            assert!((v[0] - 0.002 * x[1]).abs() < 1e-12);
            assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        }
        assert!(r.vi_residual.unwrap() >= -1e-12);
    }

    #[test]
    fn manufactured_displacement_is_recovered() {
        let pb = shear_problem(kin(0.2), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lift = pb.disc.dirichlet_lift(0.01);
        let mut target = lift.clone();
        for d in pb.disc.u_layout.free_dofs() {
            target[d] = rng.gen_range(-0.01..0.01);
        }
        let x: Vec<f64> = (0..pb.disc.np()).map(|_| rng.gen_range(-0.01..0.01)).collect();
        // f = K_uu u* + K_up x on the free rows
        let mut f = pb.blocks.kuu.apply(&target);
        let kx = pb.blocks.kup.apply(&x);
        for d in 0..f.len() {
            f[d] += kx[d];
        }
        let (u, info) = pb.u_solve(&x, &lift, &f, None, 1e-13, 1000).unwrap();
        assert!(info.relative_residual <= 1e-13);
        for (a, b) in u.iter().zip(&target) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn solve_p_without_threshold_gives_quadratic_minimizer() {
        let mut v = kin(0.3);
        v.params.sigma_y = 0.0;
        let pb = shear_problem(v, 2);
        let cfg = SolverConfig {
            tol_fista: 1e-12,
            tol_outer: 1e-14,
            ..SolverConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..pb.disc.nu()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let zero = vec![0.0; pb.disc.np()];
        let gam = vec![0.0; pb.grid().node_count()];
        let (x, _) = solve_p(&pb, &u, &zero, &gam, &cfg).unwrap();
        // A_p x = −K_upᵀ u
        let r: Vec<f64> = pb.p_gradient(&u, &x);
        let b = pb.kpu.apply(&u);
        assert!(crate::linalg::norm(&r) <= 1e-9 * crate::linalg::norm(&b));
        let (x0, _) = solve_p(&pb, &vec![0.0; pb.disc.nu()], &zero, &gam, &cfg).unwrap();
        assert!(x0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.tol_cg = 0.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> {
            dt_schedule: vec![0.5, 0.25],
            ..SolverConfig::default()
        };
        assert_eq!(c.dt(0), 0.5);
        assert_eq!(c.dt(7), 0.25);
    }
}
