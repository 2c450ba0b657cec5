//! The energetic microstress `mᵢ = 2μL_c² skew ∇εᵖᵢ` and its divergence.
//!
//! For any smooth `εᵖ`, `Div m = −μL_c² Curl Curl εᵖ`. The trace of `Div m`
//! equals `−μL_c² div div εᵖ`, which does not vanish for a general symmetric
//! trace-free field; it does vanish once `m` is projected onto the
//! deviatoric-symmetric part in its first two indices, which is the part
//! that works against admissible variations `δεᵖ ∈ Sym ∩ sl(3)`.

use crate::error::Result;
use crate::tensor::MaterialParams;

use super::poly::{symbolic_curl, Coeff, Poly, PolyTensorField};

/// Third-order polynomial field `m[i][j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroStress<T> {
    pub m: [[[Poly<T>; 3]; 3]; 3],
}

impl<T: Coeff> MicroStress<T> {
    /// `mᵢ = 2c skew ∇εᵢ` with `c = μL_c²`.
    pub fn from_plastic_strain(c: &T, eps_p: &PolyTensorField<T>) -> Self {
        let two_c = c.clone() + c.clone();
        let half = T::one() / (T::one() + T::one());
        let g = eps_p.gradient();
        MicroStress {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    std::array::from_fn(|k| {
                        (g[i][j][k].clone() - g[i][k][j].clone()).scale(&half).scale(&two_c)
                    })
                })
            }),
        }
    }

    /// `(Div m)_ij = Σ_k ∂m_ijk/∂x_k`.
    pub fn div(&self) -> PolyTensorField<T> {
        PolyTensorField::from_fn(|i, j| {
            (0..3).fold(Poly::zero(), |acc, k| acc + self.m[i][j][k].derivative(k))
        })
    }

    /// Deviatoric-symmetric projection in the first two indices.
    pub fn dev_sym(&self) -> Self {
        let slices: [PolyTensorField<T>; 3] =
            std::array::from_fn(|k| PolyTensorField::from_fn(|i, j| self.m[i][j][k].clone()).sym().dev());
        MicroStress {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| std::array::from_fn(|k| slices[k].rows[i][j].clone()))
            }),
        }
    }
}

/// Polynomial residuals of the microstress identities.
#[derive(Clone, Debug, PartialEq)]
pub struct MicrostressResiduals<T> {
    /// `Div m + c Curl Curl εᵖ`.
    pub raw: PolyTensorField<T>,
    /// `Div m̃ + c dev sym Curl Curl εᵖ` with `m̃` the projected microstress.
    pub projected: PolyTensorField<T>,
    /// `tr Div m̃`.
    pub trace: Poly<T>,
    /// `tr Div m = −c div div εᵖ` (diagnostic, not an identity).
    pub raw_trace: Poly<T>,
}

impl<T: Coeff> MicrostressResiduals<T> {
    /// True when every identity residual is the zero polynomial.
    pub fn is_exact_zero(&self) -> bool {
        self.raw.is_zero() && self.projected.is_zero() && self.trace.is_zero()
    }
}

pub fn microstress_residuals<T: Coeff>(c: &T, eps_p: &PolyTensorField<T>) -> Result<MicrostressResiduals<T>> {
    let m = MicroStress::from_plastic_strain(c, eps_p);
    let curl_curl = symbolic_curl(&symbolic_curl(eps_p)?)?.scale(c);
    let div = m.div();
    let div_proj = m.dev_sym().div();
    Ok(MicrostressResiduals {
        raw: div.add(&curl_curl),
        projected: div_proj.add(&curl_curl.sym().dev()),
        trace: div_proj.trace(),
        raw_trace: div.trace(),
    })
}

/// Largest pointwise residual of the microstress identities over the sample
/// points: `|Div m + μL_c² Curl Curl εᵖ|`, its deviatoric-symmetric
/// counterpart, and `|tr Div m̃|`.
pub fn microstress_identity_check(
    params: &MaterialParams<f64>,
    eps_p: &PolyTensorField<f64>,
    points: &[[f64; 3]],
) -> Result<f64> {
    let c = params.mu * params.lc * params.lc;
    let r = microstress_residuals(&c, eps_p)?;
    let mut worst = 0.0f64;
    for x in points {
        let frob = |t: &PolyTensorField<f64>| {
            t.eval_f64(x).iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
        };
        worst = worst
            .max(frob(&r.raw))
            .max(frob(&r.projected))
            .max(r.trace.eval_f64(x).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    /// Symmetric trace-free quadratic field with integer-ish coefficients.
    fn sample_field() -> PolyTensorField<Rational64> {
        let a = Poly::from_terms(&[(q(1, 1), [2, 0, 0]), (q(-3, 2), [0, 1, 1]), (q(2, 1), [1, 0, 0])]).unwrap();
        let b = Poly::from_terms(&[(q(5, 1), [1, 1, 0]), (q(1, 3), [0, 0, 2])]).unwrap();
        let c = Poly::from_terms(&[(q(-2, 1), [1, 0, 1]), (q(7, 1), [0, 2, 0])]).unwrap();
        let d = Poly::from_terms(&[(q(4, 1), [0, 1, 0]), (q(1, 1), [2, 0, 0]), (q(-1, 1), [0, 0, 2])]).unwrap();
        let e = Poly::from_terms(&[(q(3, 1), [1, 1, 1])]).unwrap();
        PolyTensorField {
            rows: [
                [a.clone(), b.clone(), c.clone()],
                [b, d.clone(), e.clone()],
                [c, e, -(a + d)],
            ],
        }
    }

    #[test]
    fn identities_hold_exactly() {
        let r = microstress_residuals(&q(3, 7), &sample_field()).unwrap();
        assert!(r.is_exact_zero());
        // The unprojected trace is −c div div εᵖ, nonzero for this field.
        assert!(!r.raw_trace.is_zero());
    }

    #[test]
    fn linear_field_has_no_microstress_divergence() {
        let x = Poly::<Rational64>::var(0);
        let y = Poly::<Rational64>::var(1);
        let eps = PolyTensorField {
            rows: [
                [x.clone(), y.clone(), Poly::zero()],
                [y, -x, Poly::zero()],
                [Poly::zero(), Poly::zero(), Poly::zero()],
            ],
        };
        let m = MicroStress::from_plastic_strain(&q(1, 1), &eps);
        assert!(m.div().is_zero());
        assert!(symbolic_curl(&symbolic_curl(&eps).unwrap()).unwrap().is_zero());
    }
}
