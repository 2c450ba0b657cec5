//! 3×3 tensor algebra: decompositions, the isotropic elasticity tensor, the
//! axial-vector map and the linear operator that turns a tensor gradient into
//! the row-wise Curl.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance on exact algebraic identities of 3×3 arithmetic.
pub const IDENTITY_TOL: f64 = 1e-12;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn dot3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3<T: Real>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

/// A real 3×3 tensor stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = T::one();
        }
        m
    }

    /// Matrix unit `e_i ⊗ e_j`.
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Self::zero();
        m.0[i][j] = T::one();
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    /// Builds the matrix whose rows are the given vectors.
    pub fn from_rows(rows: [Vec3<T>; 3]) -> Self {
        Mat3(rows)
    }

    /// Outer product `a ⊗ b`.
    pub fn outer(a: &Vec3<T>, b: &Vec3<T>) -> Self {
        Self::from_fn(|i, j| a[i] * b[j])
    }

    /// Skew matrix `Ā` with `Ā v = a × v`.
    pub fn skew_from_axial(a: &Vec3<T>) -> Self {
        let z = T::zero();
        Mat3([[z, -a[2], a[1]], [a[2], z, -a[0]], [-a[1], a[0], z]])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        self.0[i]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn sym(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|i, j| half * (self.0[i][j] + self.0[j][i]))
    }

    pub fn skew(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|i, j| half * (self.0[i][j] - self.0[j][i]))
    }

    pub fn dev(&self) -> Self {
        let third = self.trace() / T::lit(3.0);
        let mut m = *self;
        for i in 0..3 {
            m.0[i][i] -= third;
        }
        m
    }

    /// Frobenius product `⟨A, B⟩ = tr(A Bᵀ)`.
    pub fn inner(&self, other: &Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flatten()
            .fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum())
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        [
            dot3(&self.0[0], v),
            dot3(&self.0[1], v),
            dot3(&self.0[2], v),
        ]
    }

    /// Transposed product `Aᵀ v`.
    pub fn tmul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (i, vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.0[i][j] * *vi;
            }
        }
        out
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self::from_fn(|i, j| f(self.0[i][j]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        Mat3::from_fn(|i, j| U::from_f64(self.0[i][j].to_f64().unwrap()).unwrap())
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real> SubAssign for Mat3<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real> Neg for Mat3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.map(|x| x * s)
    }
}

/// Result of [`decompose`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition<T> {
    pub sym: Mat3<T>,
    pub skew: Mat3<T>,
    pub dev: Mat3<T>,
    pub tr: T,
}

pub fn decompose<T: Real>(x: &Mat3<T>) -> Decomposition<T> {
    Decomposition {
        sym: x.sym(),
        skew: x.skew(),
        dev: x.dev(),
        tr: x.inner(&Mat3::identity()),
    }
}

/// Axial vector of a skew-symmetric tensor: `A v = axl(A) × v`.
pub fn axl<T: Real>(a: &Mat3<T>) -> Result<Vec3<T>> {
    let sym_norm = a.sym().norm();
    let norm = a.norm();
    if sym_norm > T::lit(IDENTITY_TOL) * norm {
        return Err(Error::NonSkewInput {
            sym_norm: sym_norm.to_f64().unwrap_or(f64::NAN),
            norm: norm.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(axl_of_skew_part(a))
}

/// `axl(skew A)` for an arbitrary tensor, `(axl skew A)_k = ½ Σ ε_kij A_ji`.
#[inline]
pub fn axl_of_skew_part<T: Real>(a: &Mat3<T>) -> Vec3<T> {
    let half = T::lit(0.5);
    [
        half * (a.0[2][1] - a.0[1][2]),
        half * (a.0[0][2] - a.0[2][0]),
        half * (a.0[1][0] - a.0[0][1]),
    ]
}

/// Lamé-type moduli and the model constants of the hardening and defect terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    pub mu: T,
    pub lambda: T,
    /// Always equal to `lambda + 2 mu / 3`.
    pub kappa: T,
    /// Dimensionless kinematic-hardening modulus.
    pub k1: T,
    /// Dimensionless isotropic-hardening modulus.
    pub k2: T,
    /// Energetic length scale.
    pub lc: T,
    pub sigma_y: T,
}

impl<T: Real> MaterialParams<T> {
    /// Builds an admissible parameter set; `kappa` is derived from `mu` and `lambda`.
    pub fn new(mu: T, lambda: T, k1: T, k2: T, lc: T, sigma_y: T) -> Result<Self> {
        let p = MaterialParams {
            mu,
            lambda,
            kappa: lambda + T::lit(2.0) * mu / T::lit(3.0),
            k1,
            k2,
            lc,
            sigma_y,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`MaterialParams::new`] but also checks a caller-supplied bulk modulus.
    pub fn with_kappa(mu: T, lambda: T, kappa: T, k1: T, k2: T, lc: T, sigma_y: T) -> Result<Self> {
        let p = Self::new(mu, lambda, k1, k2, lc, sigma_y)?;
        let scale = p.kappa.abs().max(mu);
        if (kappa - p.kappa).abs() > T::lit(IDENTITY_TOL) * scale {
            return Err(Error::InvalidParams(format!(
                "kappa = {kappa} inconsistent with lambda + 2 mu / 3 = {}",
                p.kappa
            )));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(T::lit(3.0) * self.lambda + T::lit(2.0) * self.mu > T::zero()) {
            return bad(format!(
                "3 lambda + 2 mu must be positive, got lambda = {}",
                self.lambda
            ));
        }
        let expected = self.lambda + T::lit(2.0) * self.mu / T::lit(3.0);
        if (self.kappa - expected).abs() > T::lit(IDENTITY_TOL) * expected.abs().max(self.mu) {
            return bad(format!("kappa = {} != lambda + 2 mu / 3", self.kappa));
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("Lc", self.lc)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.sigma_y > T::zero()) {
            return bad(format!("sigma_y must be positive, got {}", self.sigma_y));
        }
        Ok(())
    }

    /// Lower ellipticity constant `m0` with `⟨X, C X⟩ ≥ m0 |sym X|²`.
    pub fn ellipticity_constant(&self) -> T {
        T::lit(2.0) * self.mu.min(self.kappa * T::lit(1.5))
    }
}

/// Isotropic elasticity `C X = 2μ sym X + λ tr(X) 𝟙`.
pub fn elasticity_apply<T: Real>(params: &MaterialParams<T>, x: &Mat3<T>) -> Mat3<T> {
    let mut out = x.sym() * (T::lit(2.0) * params.mu);
    let vol = params.lambda * x.trace();
    for i in 0..3 {
        out.0[i][i] += vol;
    }
    out
}

/// `⟨C X, Y⟩` without forming `C X`.
#[inline]
pub fn elastic_product<T: Real>(params: &MaterialParams<T>, x: &Mat3<T>, y: &Mat3<T>) -> T {
    T::lit(2.0) * params.mu * x.sym().inner(&y.sym()) + params.lambda * x.trace() * y.trace()
}

/// Tensor gradient with `g[i][j][k] = ∂X_ij / ∂x_k`.
pub type TensorGradient<T> = [[[T; 3]; 3]; 3];

/// The operator mapping `∇X` to `Curl X`: row `i` is `2 axl(skew ∇X_i)`.
pub fn l_apply<T: Real>(g: &TensorGradient<T>) -> Mat3<T> {
    let two = T::lit(2.0);
    let mut out = Mat3::zero();
    for i in 0..3 {
        let a = axl_of_skew_part(&Mat3(g[i]));
        for k in 0..3 {
            out.0[i][k] = two * a[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut impl Rng) -> Mat3<f64> {
        Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    fn params() -> MaterialParams<f64> {
        MaterialParams::new(1.3, 0.7, 0.5, 0.2, 0.1, 0.01).unwrap()
    }

    #[test]
    fn decompose_identity() {
        let d = decompose(&Mat3::<f64>::identity());
        assert_eq!(d.sym, Mat3::identity());
        assert_eq!(d.skew, Mat3::zero());
        assert_eq!(d.dev, Mat3::zero());
        assert_eq!(d.tr, 3.0);
    }

    #[test]
    fn decompose_skew() {
        let a = Mat3::skew_from_axial(&[0.3, -1.2, 2.0]);
        let d = decompose(&a);
        assert_eq!(d.sym, Mat3::zero());
        assert_eq!(d.dev, a);
        assert_eq!(d.tr, 0.0);
    }

    #[test]
    fn decompose_random_is_orthogonal_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_mat(&mut rng);
            let y = random_mat(&mut rng);
            let d = decompose(&x);
            assert_eq!(d.sym + d.skew, x);
            assert!(d.dev.trace().abs() < 1e-15);
            assert!(d.sym.inner(&y.skew()).abs() < 1e-15);
        }
    }

    #[test]
    fn axl_matches_entries() {
        let (a1, a2, a3) = (0.4, -0.9, 1.7);
        let mut a = Mat3::<f64>::zero();
        a[(0, 1)] = -a3;
        a[(0, 2)] = a2;
        a[(1, 2)] = -a1;
        a[(1, 0)] = a3;
        a[(2, 0)] = -a2;
        a[(2, 1)] = a1;
        assert_eq!(axl(&a).unwrap(), [a1, a2, a3]);
        assert_eq!(axl(&Mat3::<f64>::zero()).unwrap(), [0.0; 3]);
    }

    #[test]
    fn axl_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_mat(&mut rng).skew();
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let lhs = a.mul_vec(&v);
            let rhs = cross(&axl(&a).unwrap(), &v);
            for k in 0..3 {
                assert!((lhs[k] - rhs[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn axl_rejects_non_skew() {
        let err = axl(&Mat3::<f64>::identity()).unwrap_err();
        assert!(matches!(err, Error::NonSkewInput { .. }));
    }

    #[test]
    fn elasticity_identity_and_skew() {
        let p = params();
        let c1 = elasticity_apply(&p, &Mat3::identity());
        let expected = Mat3::identity() * (3.0 * p.kappa);
        assert!((c1 - expected).max_abs() < 1e-14);
        assert!((Mat3::identity() * (2.0 * p.mu + 3.0 * p.lambda) - expected).max_abs() < 1e-14);
        let s = Mat3::skew_from_axial(&[1.0, 2.0, 3.0]);
        assert_eq!(elasticity_apply(&p, &s), Mat3::zero());
    }

    #[test]
    fn elasticity_two_forms_agree_and_are_elliptic() {
        let p = params();
        let m0 = p.ellipticity_constant();
        assert!(m0 > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = random_mat(&mut rng);
            let c = elasticity_apply(&p, &x);
            let alt = x.sym().dev() * (2.0 * p.mu) + Mat3::identity() * (p.kappa * x.trace());
            assert!((c - alt).max_abs() < 1e-13);
            assert!(x.inner(&c) >= m0 * x.sym().inner(&x.sym()) - 1e-13);
            assert!((c - c.transpose()).max_abs() == 0.0);
        }
    }

    #[test]
    fn params_validation() {
        assert!(MaterialParams::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, -0.7, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, -0.6, 0.0, 0.0, 0.0, 1.0).is_ok());
        assert!(MaterialParams::with_kappa(1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(MaterialParams::with_kappa(1.0, 1.0, 1.0 + 2.0 / 3.0, 0.0, 0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn l_apply_rigid_rows() {
        // Row i of X is a_i × x, so ∇X_i is the constant skew matrix of a_i.
        let a: [[f64; 3]; 3] = [[0.2, -1.0, 0.5], [1.5, 0.3, -0.7], [-0.4, 0.9, 2.1]];
        let mut g = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            g[i] = Mat3::skew_from_axial(&a[i]).0;
        }
        let c = l_apply(&g);
        for i in 0..3 {
            for k in 0..3 {
                assert!((c[(i, k)] - 2.0 * a[i][k]).abs() < 1e-15);
            }
        }
        assert_eq!(l_apply(&[[[0.0f64; 3]; 3]; 3]), Mat3::zero());
    }

    #[test]
    fn l_apply_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut g = [[[0.0; 3]; 3]; 3];
            let mut h = [[[0.0; 3]; 3]; 3];
            let mut c = [[[0.0; 3]; 3]; 3];
            let (al, be) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        g[i][j][k] = rng.gen_range(-1.0..1.0);
                        h[i][j][k] = rng.gen_range(-1.0..1.0);
                        c[i][j][k] = al * g[i][j][k] + be * h[i][j][k];
                    }
                }
            }
            let lhs = l_apply(&c);
            let rhs = l_apply(&g) * al + l_apply(&h) * be;
            assert!((lhs - rhs).max_abs() < 1e-14);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x = Mat3::<f32>::from_fn(|i, j| (i * 3 + j) as f32);
        let d = decompose(&x);
        assert_eq!(d.sym + d.skew, x);
        assert!(d.dev.trace().abs() < 1e-5);
    }
}
