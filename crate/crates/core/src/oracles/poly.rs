//! Multivariate polynomials in `(x₁, x₂, x₃)` of total degree at most 3 and
//! the tensor calculus built on them.
//!
//! Coefficients only need ring arithmetic, so the same code runs in `f64`
//! and in exact rationals.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Num, ToPrimitive};

use crate::error::{Error, Result};

/// Largest total degree a [`Poly`] can hold.
pub const MAX_DEGREE: usize = 3;

const N_MONO: usize = 20;

/// Exponents of every monomial of degree ≤ 3, graded.
const MONOMIALS: [[u8; 3]; N_MONO] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [1, 1, 0],
    [1, 0, 1],
    [0, 2, 0],
    [0, 1, 1],
    [0, 0, 2],
    [3, 0, 0],
    [2, 1, 0],
    [2, 0, 1],
    [1, 2, 0],
    [1, 1, 1],
    [1, 0, 2],
    [0, 3, 0],
    [0, 2, 1],
    [0, 1, 2],
    [0, 0, 3],
];

fn mono_index(e: [u8; 3]) -> Option<usize> {
    MONOMIALS.iter().position(|m| *m == e)
}

/// Coefficient ring of the symbolic oracle.
pub trait Coeff: Num + Clone + PartialEq + Debug + ToPrimitive {}
impl<T: Num + Clone + PartialEq + Debug + ToPrimitive> Coeff for T {}

fn from_int<T: Coeff>(n: i64) -> T {
    let mut acc = T::zero();
    for _ in 0..n.unsigned_abs() {
        acc = acc + T::one();
    }
    if n < 0 {
        T::zero() - acc
    } else {
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Coeff> Poly<T> {
    pub fn zero() -> Self {
        Poly {
            coeffs: vec![T::zero(); N_MONO],
        }
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(c, [0, 0, 0]).expect("degree 0")
    }

    /// The coordinate `x_k`.
    pub fn var(k: usize) -> Self {
        let mut e = [0u8; 3];
        e[k] = 1;
        Self::monomial(T::one(), e).expect("degree 1")
    }

    /// `c x₁^e₁ x₂^e₂ x₃^e₃`.
    pub fn monomial(c: T, e: [u8; 3]) -> Result<Self> {
        let deg = e.iter().map(|&d| d as usize).sum::<usize>();
        let Some(i) = mono_index(e) else {
            return Err(Error::DegreeOverflow {
                degree: deg,
                cap: MAX_DEGREE,
            });
        };
        let mut p = Self::zero();
        p.coeffs[i] = c;
        Ok(p)
    }

    /// Builds from `(coefficient, exponents)` terms.
    pub fn from_terms(terms: &[(T, [u8; 3])]) -> Result<Self> {
        let mut p = Self::zero();
        for (c, e) in terms {
            p = p + Self::monomial(c.clone(), *e)?;
        }
        Ok(p)
    }

    pub fn coeff(&self, e: [u8; 3]) -> T {
        mono_index(e).map_or(T::zero(), |i| self.coeffs[i].clone())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, _)| e.iter().map(|&d| d as usize).sum())
            .max()
    }

    pub fn scale(&self, s: &T) -> Self {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    /// `∂/∂x_k`.
    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in MONOMIALS.iter().zip(&self.coeffs) {
            if e[k] == 0 || c.is_zero() {
                continue;
            }
            let mut d = *e;
            d[k] -= 1;
            let i = mono_index(d).expect("lower degree");
            out.coeffs[i] = out.coeffs[i].clone() + c.clone() * from_int::<T>(e[k] as i64);
        }
        out
    }

    /// Product, failing when the result exceeds the degree cap.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (ea, ca) in MONOMIALS.iter().zip(&self.coeffs) {
            if ca.is_zero() {
                continue;
            }
            for (eb, cb) in MONOMIALS.iter().zip(&other.coeffs) {
                if cb.is_zero() {
                    continue;
                }
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                let Some(i) = mono_index(e) else {
                    return Err(Error::DegreeOverflow {
                        degree: e.iter().map(|&d| d as usize).sum(),
                        cap: MAX_DEGREE,
                    });
                };
                out.coeffs[i] = out.coeffs[i].clone() + ca.clone() * cb.clone();
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[T; 3]) -> T {
        let mut s = T::zero();
        for (e, c) in MONOMIALS.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut term = c.clone();
            for d in 0..3 {
                for _ in 0..e[d] {
                    term = term * x[d].clone();
                }
            }
            s = s + term;
        }
        s
    }

    /// Evaluates in `f64`.
    pub fn eval_f64(&self, x: &[f64; 3]) -> f64 {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                c.to_f64().unwrap_or(f64::NAN)
                    * x[0].powi(e[0] as i32)
                    * x[1].powi(e[1] as i32)
                    * x[2].powi(e[2] as i32)
            })
            .sum()
    }
}

impl<T: Coeff> Add for Poly<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Poly {
            coeffs: self.coeffs.into_iter().zip(rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Coeff> Sub for Poly<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Poly {
            coeffs: self.coeffs.into_iter().zip(rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Coeff> Neg for Poly<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Poly {
            coeffs: self.coeffs.into_iter().map(|a| T::zero() - a).collect(),
        }
    }
}

impl<T: Coeff> Mul<&T> for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, s: &T) -> Poly<T> {
        self.scale(s)
    }
}

/// A vector of polynomials.
pub type PolyVector<T> = [Poly<T>; 3];

/// A 3×3 tensor field with polynomial entries.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTensorField<T> {
    pub rows: [[Poly<T>; 3]; 3],
}

impl<T: Coeff> PolyTensorField<T> {
    pub fn zero() -> Self {
        Self::from_fn(|_, _| Poly::zero())
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Poly<T>) -> Self {
        PolyTensorField {
            rows: std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))),
        }
    }

    /// Row `i` equal to `∇v_i`.
    pub fn gradient_of(v: &PolyVector<T>) -> Self {
        Self::from_fn(|i, j| v[i].derivative(j))
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly<T> {
        &self.rows[i][j]
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().flatten().all(Poly::is_zero)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.rows[j][i].clone())
    }

    pub fn trace(&self) -> Poly<T> {
        self.rows[0][0].clone() + self.rows[1][1].clone() + self.rows[2][2].clone()
    }

    pub fn sym(&self) -> Self {
        let half = T::one() / from_int::<T>(2);
        Self::from_fn(|i, j| (self.rows[i][j].clone() + self.rows[j][i].clone()).scale(&half))
    }

    pub fn skew(&self) -> Self {
        let half = T::one() / from_int::<T>(2);
        Self::from_fn(|i, j| (self.rows[i][j].clone() - self.rows[j][i].clone()).scale(&half))
    }

    pub fn dev(&self) -> Self {
        let third = self.trace().scale(&(T::one() / from_int::<T>(3)));
        Self::from_fn(|i, j| {
            if i == j {
                self.rows[i][j].clone() - third.clone()
            } else {
                self.rows[i][j].clone()
            }
        })
    }

    pub fn scale(&self, s: &T) -> Self {
        Self::from_fn(|i, j| self.rows[i][j].scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| self.rows[i][j].clone() + other.rows[i][j].clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| self.rows[i][j].clone() - other.rows[i][j].clone())
    }

    /// `∂X_ij/∂x_k` as a third-order array of polynomials.
    pub fn gradient(&self) -> [[[Poly<T>; 3]; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| self.rows[i][j].derivative(k))))
    }

    /// Entries evaluated at a point.
    pub fn eval(&self, x: &[T; 3]) -> [[T; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[i][j].eval(x)))
    }

    pub fn eval_f64(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[i][j].eval_f64(x)))
    }

    /// Frobenius product `⟨X, Y⟩`, failing past the degree cap.
    pub fn inner(&self, other: &Self) -> Result<Poly<T>> {
        let mut s = Poly::zero();
        for i in 0..3 {
            for j in 0..3 {
                s = s + self.rows[i][j].checked_mul(&other.rows[i][j])?;
            }
        }
        Ok(s)
    }
}

/// Scalar gradient.
pub fn symbolic_grad<T: Coeff>(f: &Poly<T>) -> PolyVector<T> {
    std::array::from_fn(|k| f.derivative(k))
}

/// Vector curl.
pub fn curl_vector<T: Coeff>(a: &PolyVector<T>) -> PolyVector<T> {
    [
        a[2].derivative(1) - a[1].derivative(2),
        a[0].derivative(2) - a[2].derivative(0),
        a[1].derivative(0) - a[0].derivative(1),
    ]
}

/// Row-wise Curl: row `i` of the result is `curl` of row `i`.
pub fn symbolic_curl<T: Coeff>(p: &PolyTensorField<T>) -> Result<PolyTensorField<T>> {
    if let Some(d) = p.rows.iter().flatten().filter_map(Poly::degree).max() {
        if d > MAX_DEGREE {
            return Err(Error::DegreeOverflow {
                degree: d,
                cap: MAX_DEGREE,
            });
        }
    }
    Ok(PolyTensorField {
        rows: std::array::from_fn(|i| curl_vector(&p.rows[i])),
    })
}

/// Row-wise divergence, `(Div X)_i = Σ_j ∂X_ij/∂x_j`.
pub fn symbolic_div<T: Coeff>(p: &PolyTensorField<T>) -> PolyVector<T> {
    std::array::from_fn(|i| {
        (0..3).fold(Poly::zero(), |acc, j| acc + p.rows[i][j].derivative(j))
    })
}
