//! Dense vector kernels, Jacobi-preconditioned conjugate gradients and power
//! iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// `y += alpha x`.
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Iteration statistics of a converged CG solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for an SPD operator.
///
/// `x` holds the initial guess and receives the solution. Convergence is
/// `‖b − A x‖ ≤ tol ‖b‖`; a zero right-hand side returns `x = 0`.
pub fn pcg<T: Real>(
    op: impl Fn(&[T], &mut [T]),
    inv_diag: &[T],
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> Result<CgInfo> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgInfo::default());
    }
    let mut r = vec![T::zero(); n];
    op(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rnorm = norm(&r);
    if rnorm <= tol * bnorm {
        return Ok(CgInfo {
            iterations: 0,
            relative_residual: (rnorm / bnorm).to_f64().unwrap(),
        });
    }
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NoConvergence {
                what: "conjugate gradients (operator not positive definite)",
                iterations: it,
                residual: (rnorm / bnorm).to_f64().unwrap(),
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm(&r);
        if rnorm <= tol * bnorm {
            return Ok(CgInfo {
                iterations: it,
                relative_residual: (rnorm / bnorm).to_f64().unwrap(),
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: (rnorm / bnorm).to_f64().unwrap(),
    })
}

/// Estimates the largest eigenvalue of `W⁻¹ A` (A symmetric PSD, W diagonal
/// positive) by power iteration with a seeded random start vector.
pub fn power_iteration<T: Real>(
    op: impl Fn(&[T], &mut [T]),
    weights: &[T],
    iterations: usize,
    seed: u64,
) -> T {
    let n = weights.len();
    if n == 0 {
        return T::zero();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let mut ax = vec![T::zero(); n];
    let mut estimate = T::zero();
    for _ in 0..iterations.max(1) {
        let wnorm = x
            .iter()
            .zip(weights)
            .map(|(xi, wi)| *xi * *xi * *wi)
            .sum::<T>()
            .sqrt();
        if wnorm == T::zero() {
            return estimate;
        }
        x.iter_mut().for_each(|v| *v = *v / wnorm);
        op(&x, &mut ax);
        estimate = dot(&x, &ax);
        for i in 0..n {
            x[i] = ax[i] / weights[i];
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn laplacian_1d(n: usize) -> crate::sparse::CsrMatrix<f64> {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplacian_1d(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.apply(&xs);
        let mut x = vec![0.0; 50];
        let inv = vec![0.5; 50];
        let info = pcg(|v, out| a.mul_vec(v, out), &inv, &b, &mut x, 1e-12, 500).unwrap();
        assert!(info.relative_residual <= 1e-12);
        let r: Vec<f64> = a.apply(&x).iter().zip(&b).map(|(p, q)| q - p).collect();
        assert!(norm(&r) / norm(&b) <= 1e-12);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_zero_rhs() {
        let a = laplacian_1d(5);
        let mut x = vec![1.0; 5];
        pcg(|v, out| a.mul_vec(v, out), &[1.0; 5], &[0.0; 5], &mut x, 1e-10, 10).unwrap();
        assert_eq!(x, vec![0.0; 5]);
    }

    #[test]
    fn cg_reports_cap() {
        let a = laplacian_1d(40);
        let b = vec![1.0; 40];
        let mut x = vec![0.0; 40];
        let err = pcg(|v, out| a.mul_vec(v, out), &[0.5; 40], &b, &mut x, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    #[test]
    fn power_iteration_estimates_top_eigenvalue() {
        let n = 30;
        let a = laplacian_1d(n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI * n as f64 / (n as f64 + 1.0)).cos();
        let est = power_iteration(|v, out| a.mul_vec(v, out), &vec![1.0; n], 200, 7);
        assert!(est <= exact * (1.0 + 1e-12));
        assert!(est > 0.95 * exact);
    }
}
