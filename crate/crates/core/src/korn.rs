//! Discrete constant of the incompatible Korn inequality
//! `‖p‖ ≤ C (‖sym p‖ + ‖Curl p‖)` on nodal trilinear tensor fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_all, discrete_curl, interpolate_tensor, Discretization};
use crate::dofs::TensorSpace;
use crate::error::{Error, Result};
use crate::grid::{apply_micro_hard_mask, BoundaryConfig, FaceSet, Grid, ShapeData, TensorField};
use crate::linalg::pcg;
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::tensor::{MaterialParams, Mat3};

#[derive(Clone, Debug, PartialEq)]
pub struct KornProblem<T> {
    pub grid: Grid<T>,
    /// Faces carrying `p × n = 0`; may be empty.
    pub gamma_faces: FaceSet,
    /// Weight `ℓ` in `‖sym p‖² + ℓ²‖Curl p‖²`.
    pub length_scale: T,
}

impl<T: Real> KornProblem<T> {
    pub fn new(grid: Grid<T>, gamma_faces: FaceSet, length_scale: T) -> Result<Self> {
        if !(length_scale > T::zero()) || !length_scale.is_finite() {
            return Err(Error::InvalidParams(format!("length scale must be positive, got {length_scale}")));
        }
        Ok(KornProblem {
            grid,
            gamma_faces,
            length_scale,
        })
    }

    fn discretization(&self) -> Discretization<T> {
        let boundary = BoundaryConfig {
            gamma_faces: self.gamma_faces,
            dirichlet_gradient: Mat3::zero(),
            micro_hard_faces: self.gamma_faces,
        };
        Discretization::new(self.grid.clone(), boundary, TensorSpace::Full)
    }

    /// `K_sym + ℓ² K_curl` and the consistent mass on the constrained space.
    pub fn matrices(&self) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
        let disc = self.discretization();
        let one = T::one();
        let params = MaterialParams::new(one, one, one, T::zero(), one, one)?;
        let b = assemble_all(&disc, &params);
        let l2 = self.length_scale * self.length_scale;
        let k = CsrMatrix::linear_combination(&[(one, &b.ksym), (l2, &b.kcurl)])?;
        Ok((k, b.mass))
    }
}

/// `(‖sym P‖² + ℓ²‖Curl P‖²) / ‖P‖²` for the masked field.
pub fn korn_quotient<T: Real>(problem: &KornProblem<T>, p: &TensorField<T>) -> Result<T> {
    let grid = &problem.grid;
    let p = apply_micro_hard_mask(grid, problem.gamma_faces, p);
    let values = interpolate_tensor(grid, &p);
    let curls = discrete_curl(grid, &p);
    let w = ShapeData::new(grid.h).weight;
    let l2 = problem.length_scale * problem.length_scale;
    let (mut num, mut den) = (T::zero(), T::zero());
    for (vc, cc) in values.iter().zip(&curls) {
        for g in 0..8 {
            let s = vc[g].sym();
            num += w * (s.inner(&s) + l2 * cc[g].inner(&cc[g]));
            den += w * vc[g].inner(&vc[g]);
        }
    }
    if den == T::zero() {
        return Err(Error::ZeroField);
    }
    Ok(num / den)
}

/// Smallest eigenvalue of `(K_sym + ℓ²K_curl) x = λ M x` by shifted inverse
/// iteration; the returned value is the Rayleigh quotient of the final
/// iterate. `1/√λ_min` estimates the Korn constant within the trilinear space.
pub fn estimate_min_quotient<T: Real>(problem: &KornProblem<T>, tol: T) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let (k, m) = problem.matrices()?;
    let n = k.nrows();
    if n == 0 {
        return Err(Error::ZeroField);
    }
    // a small positive shift keeps the solves SPD when constant skew
    // fields lie in the kernel
    let shift = T::lit(1e-3);
    let a = CsrMatrix::linear_combination(&[(T::one(), &k), (shift, &m)])?;
    let inv: Vec<T> = a.diagonal().iter().map(|d| T::one() / *d).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6f726e);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let rayleigh = |x: &[T]| k.quad_form(x) / m.quad_form(x);
    let mut lambda = rayleigh(&x);
    let max_iter = 1000;
    let mut y = vec![T::zero(); n];
    for _ in 0..max_iter {
        let b = m.apply(&x);
        pcg(|v, out| a.mul_vec(v, out), &inv, &b, &mut y, T::lit(1e-12), 20 * n)?;
        let nm = m.quad_form(&y).sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = *yi / nm;
        }
        let next = rayleigh(&x);
        let scale = next.abs().max(lambda.abs()).max(T::one());
        if (next - lambda).abs() <= tol * scale {
            return Ok(next.max(T::zero()));
        }
        lambda = next;
    }
    Err(Error::NoConvergence {
        what: "inverse iteration",
        iterations: max_iter,
        residual: lambda.to_f64().unwrap_or(f64::NAN),
    })
}

/// Constant skew tensor field with axial vector `a`.
pub fn constant_skew_field<T: Real>(grid: &Grid<T>, a: [T; 3]) -> TensorField<T> {
    TensorField::constant(grid, Mat3::skew_from_axial(&a))
}
