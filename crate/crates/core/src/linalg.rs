//! Closed-form 2×2 complex matrix functions used pointwise in λ.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::C;

pub type Mat2 = Matrix2<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}

pub fn mat(a: C, b: C, c_: C, d: C) -> Mat2 {
    Mat2::new(a, b, c_, d)
}

pub fn eye() -> Mat2 {
    Mat2::identity()
}

pub fn diag(a: C, d: C) -> Mat2 {
    Mat2::new(a, C::new(0.0, 0.0), C::new(0.0, 0.0), d)
}

pub fn det(m: &Mat2) -> C {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Inverse via the adjugate; callers guarantee det ≠ 0.
pub fn inv(m: &Mat2) -> Mat2 {
    let d = det(m);
    Mat2::new(m[(1, 1)] / d, -m[(0, 1)] / d, -m[(1, 0)] / d, m[(0, 0)] / d)
}

/// Largest entry modulus.
pub fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Elementwise conjugate (not transposed).
pub fn conj(m: &Mat2) -> Mat2 {
    m.map(|z| z.conj())
}

/// Splits m = mid·I + (m − mid·I) with eigenvalues mid ± d.
fn spectral(m: &Mat2) -> (C, C) {
    let mid = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let d = (mid * mid - det(m)).sqrt();
    (mid, d)
}

/// f(m) = f0·I + f1·(m − mid·I).
fn apply(m: &Mat2, mid: C, f0: C, f1: C) -> Mat2 {
    let n = m - Mat2::identity() * mid;
    Mat2::identity() * f0 + n * f1
}

pub fn expm(m: &Mat2) -> Mat2 {
    let (mid, d) = spectral(m);
    let em = mid.exp();
    let sinhc = if d.norm() < 1e-4 {
        let d2 = d * d;
        C::new(1.0, 0.0) + d2 / 6.0 + d2 * d2 / 120.0
    } else {
        d.sinh() / d
    };
    apply(m, mid, em * d.cosh(), em * sinhc)
}

fn check_branch(z: C) -> Result<()> {
    if z.norm() == 0.0 || (z.re < 0.0 && z.im.abs() < 1e-12 * z.norm()) {
        return Err(Error::BranchCut(format!("{z}")));
    }
    Ok(())
}

/// Principal logarithm; fails if an eigenvalue is on the negative real axis.
pub fn logm(m: &Mat2) -> Result<Mat2> {
    let (mid, d) = spectral(m);
    let (a, b) = (mid + d, mid - d);
    check_branch(a)?;
    check_branch(b)?;
    let f0 = (a.ln() + b.ln()) * 0.5;
    let x = d / mid;
    let f1 = if x.norm() < 1e-3 {
        let x2 = x * x;
        (C::new(1.0, 0.0) + x2 / 3.0 + x2 * x2 / 5.0 + x2 * x2 * x2 / 7.0) / mid
    } else {
        (a.ln() - b.ln()) / (d * 2.0)
    };
    Ok(apply(m, mid, f0, f1))
}

/// Principal square root.
pub fn sqrtm(m: &Mat2) -> Result<Mat2> {
    let (mid, d) = spectral(m);
    let (a, b) = (mid + d, mid - d);
    check_branch(a)?;
    check_branch(b)?;
    let (sa, sb) = (a.sqrt(), b.sqrt());
    Ok(apply(m, mid, (sa + sb) * 0.5, (sa + sb).inv()))
}

/// m^s = exp(s·log m).
pub fn powm(m: &Mat2, s: C) -> Result<Mat2> {
    Ok(expm(&(logm(m)? * s)))
}

/// Cholesky factor of a Hermitian positive definite matrix (lower, real positive diagonal).
pub fn chol(m: &Mat2) -> Result<Mat2> {
    let a = m[(0, 0)].re;
    if a <= 0.0 {
        return Err(Error::Singular(a));
    }
    let l11 = a.sqrt();
    let l21 = m[(1, 0)] / l11;
    let s = m[(1, 1)].re - l21.norm_sqr();
    if s <= 0.0 {
        return Err(Error::Singular(s));
    }
    Ok(Mat2::new(C::new(l11, 0.0), C::new(0.0, 0.0), l21, C::new(s.sqrt(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        max_abs(&(a - b)) < tol
    }

    #[test]
    fn exp_log_round_trip() {
        let m = mat(c(0.1, 0.2), c(-0.3, 0.05), c(0.2, -0.1), c(-0.05, 0.1));
        let e = expm(&m);
        assert!(close(&logm(&e).unwrap(), &m, 1e-14));
        let s = sqrtm(&e).unwrap();
        assert!(close(&(s * s), &e, 1e-14));
    }

    #[test]
    fn repeated_eigenvalue() {
        let m = mat(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let e = expm(&m);
        assert!(close(&e, &mat(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)), 1e-15));
        assert!(close(&logm(&e).unwrap(), &m, 1e-15));
    }

    #[test]
    fn diagonal_exp() {
        let a = 0.1;
        let m = diag(c(0.0, 2.0 * std::f64::consts::PI * a), c(0.0, -2.0 * std::f64::consts::PI * a));
        let e = expm(&m);
        let want = diag(C::from_polar(1.0, 2.0 * std::f64::consts::PI * a), C::from_polar(1.0, -2.0 * std::f64::consts::PI * a));
        assert!(close(&e, &want, 1e-15));
    }

    #[test]
    fn log_rejects_negative_eigenvalue() {
        assert!(logm(&diag(c(-1.0, 0.0), c(-1.0, 0.0))).is_err());
    }
}
