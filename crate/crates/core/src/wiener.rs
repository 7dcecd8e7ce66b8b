//! Truncated Laurent series f(λ) = Σ_{|i|≤N} f_i λ^i with the weighted norm
//! Σ |f_i| ρ^{|i|}, plus the sample/coefficient transforms used for all
//! nonlinear pointwise operations.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C;

pub const DEFAULT_RHO: f64 = 1.2;
pub const DEFAULT_MODES: usize = 16;
pub const TAIL_TOL: f64 = 1e-10;

/// Subspaces of the loop algebra used as membership tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    /// Modes i ≥ 0.
    Plus,
    /// Modes i ≤ 0.
    Minus,
    /// Modes i > 0.
    StrictPlus,
    /// Modes i < 0.
    StrictMinus,
    /// Real coefficients.
    Real,
    /// Real coefficients, modes i ≥ 0.
    RealPlus,
    /// Real coefficients, modes i > 0.
    RealStrictPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopScalar {
    coeffs: Vec<C>,
    rho: f64,
}

fn check_rho(a: f64, b: f64) -> Result<()> {
    if a != b {
        return Err(Error::RhoMismatch(a, b));
    }
    Ok(())
}

impl LoopScalar {
    pub fn zeros(n: usize, rho: f64) -> Self {
        LoopScalar { coeffs: vec![C::new(0.0, 0.0); 2 * n + 1], rho }
    }

    pub fn constant(c: C, n: usize, rho: f64) -> Self {
        let mut f = Self::zeros(n, rho);
        f.coeffs[n] = c;
        f
    }

    /// c·λ^k; k must satisfy |k| ≤ n.
    pub fn monomial(k: i64, c: C, n: usize, rho: f64) -> Self {
        let mut f = Self::zeros(n, rho);
        f.set(k, c);
        f
    }

    /// Builds from (mode, coefficient) pairs.
    pub fn from_modes(n: usize, rho: f64, modes: &[(i64, C)]) -> Self {
        let mut f = Self::zeros(n, rho);
        for &(k, c) in modes {
            f.set(k, f.coeff(k) + c);
        }
        f
    }

    /// Coefficients ordered from mode −N to N.
    pub fn from_coeffs(coeffs: Vec<C>, rho: f64) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient vector must have odd length");
        LoopScalar { coeffs, rho }
    }

    /// Real-coefficient polynomial Σ_{i≥0} c_i λ^i.
    pub fn from_real_poly(c: &[f64], n: usize, rho: f64) -> Self {
        let mut f = Self::zeros(n, rho);
        for (i, &v) in c.iter().enumerate().take(n + 1) {
            f.set(i as i64, C::new(v, 0.0));
        }
        f
    }

    pub fn n(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// f_i, zero outside the stored range.
    pub fn coeff(&self, i: i64) -> C {
        let n = self.n() as i64;
        if i.abs() > n {
            C::new(0.0, 0.0)
        } else {
            self.coeffs[(i + n) as usize]
        }
    }

    pub fn set(&mut self, i: i64, c: C) {
        let n = self.n() as i64;
        assert!(i.abs() <= n, "mode {i} outside truncation {n}");
        self.coeffs[(i + n) as usize] = c;
    }

    fn modes(&self) -> impl Iterator<Item = (i64, C)> + '_ {
        let n = self.n() as i64;
        self.coeffs.iter().enumerate().map(move |(k, &c)| (k as i64 - n, c))
    }

    pub fn norm(&self) -> f64 {
        self.modes().map(|(i, c)| c.norm() * self.rho.powi(i.abs() as i32)).sum()
    }

    /// Same series re-truncated to `n` modes; returns the dropped-tail norm.
    pub fn resized(&self, n: usize) -> (Self, f64) {
        let mut out = Self::zeros(n, self.rho);
        let mut tail = 0.0;
        for (i, c) in self.modes() {
            if i.unsigned_abs() as usize <= n {
                out.set(i, c);
            } else {
                tail += c.norm() * self.rho.powi(i.abs() as i32);
            }
        }
        (out, tail)
    }

    pub fn add(&self, g: &Self) -> Result<Self> {
        check_rho(self.rho, g.rho)?;
        let n = self.n().max(g.n());
        let mut out = Self::zeros(n, self.rho);
        for i in -(n as i64)..=(n as i64) {
            out.set(i, self.coeff(i) + g.coeff(i));
        }
        Ok(out)
    }

    pub fn sub(&self, g: &Self) -> Result<Self> {
        self.add(&g.scale(C::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C) -> Self {
        LoopScalar { coeffs: self.coeffs.iter().map(|c| c * s).collect(), rho: self.rho }
    }

    /// Product truncated to max(N_f, N_g) modes.
    pub fn mul(&self, g: &Self) -> Result<Self> {
        Ok(self.mul_truncated(g, self.n().max(g.n()))?.0)
    }

    /// Exact convolution truncated to `n_out` modes, with the dropped-tail norm.
    pub fn mul_truncated(&self, g: &Self, n_out: usize) -> Result<(Self, f64)> {
        check_rho(self.rho, g.rho)?;
        let nf = self.n() as i64;
        let ng = g.n() as i64;
        let nfull = (nf + ng) as usize;
        let mut full = Self::zeros(nfull, self.rho);
        for (i, a) in self.modes() {
            if a == C::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in g.modes() {
                let k = (i + j + nfull as i64) as usize;
                full.coeffs[k] += a * b;
            }
        }
        Ok(full.resized(n_out))
    }

    /// Coefficient-wise conjugate: bar(f)(λ) = conj f(conj λ).
    pub fn bar(&self) -> Self {
        LoopScalar { coeffs: self.coeffs.iter().map(|c| c.conj()).collect(), rho: self.rho }
    }

    /// f*(λ) = conj f(1/conj λ); equals conj f on the circle.
    pub fn star(&self) -> Self {
        LoopScalar { coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect(), rho: self.rho }
    }

    pub fn re(&self) -> Self {
        LoopScalar { coeffs: self.coeffs.iter().map(|c| C::new(c.re, 0.0)).collect(), rho: self.rho }
    }

    pub fn im(&self) -> Self {
        LoopScalar { coeffs: self.coeffs.iter().map(|c| C::new(c.im, 0.0)).collect(), rho: self.rho }
    }

    /// Splits f = f⁻ + f⁰ + f⁺.
    pub fn project(&self) -> (Self, C, Self) {
        let n = self.n();
        let mut minus = Self::zeros(n, self.rho);
        let mut plus = Self::zeros(n, self.rho);
        for (i, c) in self.modes() {
            if i < 0 {
                minus.set(i, c);
            } else if i > 0 {
                plus.set(i, c);
            }
        }
        (minus, self.coeff(0), plus)
    }

    /// Value without the annulus check.
    pub fn eval(&self, lambda: C) -> C {
        let n = self.n() as i64;
        let mut acc = C::new(0.0, 0.0);
        // Horner on the positive part, then the negative part in 1/λ.
        for i in (0..=n).rev() {
            acc = acc * lambda + self.coeff(i);
        }
        if n > 0 {
            let inv = lambda.inv();
            let mut neg = C::new(0.0, 0.0);
            for i in (1..=n).rev() {
                neg = neg * inv + self.coeff(-i);
            }
            acc += neg * inv;
        }
        acc
    }

    pub fn eval_and_deriv(&self, lambda: C) -> Result<(C, C)> {
        let r = lambda.norm();
        if !(r > 1.0 / self.rho && r < self.rho) {
            return Err(Error::OutsideAnnulus(r));
        }
        let mut d = C::new(0.0, 0.0);
        for (i, c) in self.modes() {
            if i != 0 {
                d += c * (i as f64) * lambda.powi(i as i32 - 1);
            }
        }
        Ok((self.eval(lambda), d))
    }

    pub fn to_samples(&self, grid: &CircleGrid) -> Result<Vec<C>> {
        grid.check(self.n())?;
        let mut spec = Spectrum::zeros(grid.m);
        for (i, c) in self.modes() {
            spec.set(i, c);
        }
        Ok(spec.to_samples(grid.shift))
    }

    /// Recovers N modes from samples; the second value is the weighted norm
    /// of the resolved modes beyond N (aliasing/truncation energy).
    pub fn from_samples(samples: &[C], grid: &CircleGrid, n: usize, rho: f64) -> Result<(Self, f64)> {
        grid.check(n)?;
        let spec = Spectrum::from_samples(samples, grid.shift);
        Ok(spec.to_loop(n, rho))
    }

    pub fn in_subspace(&self, s: Subspace, tol: f64) -> bool {
        let bad: f64 = self
            .modes()
            .map(|(i, c)| {
                let w = self.rho.powi(i.abs() as i32);
                let outside = match s {
                    Subspace::Plus | Subspace::RealPlus => i < 0,
                    Subspace::Minus => i > 0,
                    Subspace::StrictPlus | Subspace::RealStrictPlus => i <= 0,
                    Subspace::StrictMinus => i >= 0,
                    Subspace::Real => false,
                };
                let real = matches!(s, Subspace::Real | Subspace::RealPlus | Subspace::RealStrictPlus);
                if outside {
                    c.norm() * w
                } else if real {
                    c.im.abs() * w
                } else {
                    0.0
                }
            })
            .sum();
        bad <= tol
    }
}

/// Circle grid λ_k = exp(2πi (k + shift)/m).
#[derive(Clone, Debug, PartialEq)]
pub struct CircleGrid {
    pub m: usize,
    pub shift: f64,
}

impl CircleGrid {
    pub fn new(m: usize) -> Self {
        CircleGrid { m, shift: 0.0 }
    }

    /// Grid offset by half a step; it never contains λ = ±1 when m is even.
    pub fn staggered(m: usize) -> Self {
        CircleGrid { m, shift: 0.5 }
    }

    /// Smallest power of two strictly above 2n+1, at least 8.
    pub fn for_modes(n: usize) -> Self {
        let mut m = 8;
        while m <= 2 * n + 1 {
            m *= 2;
        }
        CircleGrid::staggered(m)
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.m <= 2 * n {
            return Err(Error::Undersampled { samples: self.m, modes: n });
        }
        Ok(())
    }

    pub fn point(&self, k: usize) -> C {
        C::from_polar(1.0, 2.0 * PI * (k as f64 + self.shift) / self.m as f64)
    }

    pub fn points(&self) -> Vec<C> {
        (0..self.m).map(|k| self.point(k)).collect()
    }

    /// Index of the sample at conj(λ_k), when the grid is closed under conjugation.
    pub fn conj_index(&self, k: usize) -> usize {
        let s2 = (2.0 * self.shift).round() as usize;
        (2 * self.m - k - s2) % self.m
    }
}

/// All m resolved modes of a sampled function, indexed −m/2 ≤ i < m/2.
#[derive(Clone, Debug)]
pub struct Spectrum {
    bins: Vec<C>,
}

impl Spectrum {
    pub fn zeros(m: usize) -> Self {
        Spectrum { bins: vec![C::new(0.0, 0.0); m] }
    }

    pub fn m(&self) -> usize {
        self.bins.len()
    }

    fn bin(&self, i: i64) -> usize {
        let m = self.bins.len() as i64;
        i.rem_euclid(m) as usize
    }

    pub fn get(&self, i: i64) -> C {
        let m = self.bins.len() as i64;
        if i < -m / 2 || i >= m - m / 2 {
            return C::new(0.0, 0.0);
        }
        self.bins[self.bin(i)]
    }

    pub fn set(&mut self, i: i64, c: C) {
        let b = self.bin(i);
        self.bins[b] = c;
    }

    pub fn from_samples(samples: &[C], shift: f64) -> Self {
        let m = samples.len();
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let mut spec = Spectrum { bins: buf };
        for i in -(m as i64 / 2)..(m as i64 - m as i64 / 2) {
            let b = spec.bin(i);
            let phase = C::from_polar(1.0 / m as f64, -2.0 * PI * i as f64 * shift / m as f64);
            spec.bins[b] *= phase;
        }
        spec
    }

    pub fn to_samples(&self, shift: f64) -> Vec<C> {
        let m = self.bins.len();
        let mut buf = vec![C::new(0.0, 0.0); m];
        for i in -(m as i64 / 2)..(m as i64 - m as i64 / 2) {
            let b = self.bin(i);
            buf[b] = self.bins[b] * C::from_polar(1.0, 2.0 * PI * i as f64 * shift / m as f64);
        }
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        buf
    }

    /// Truncates to N modes and reports the weighted norm of the rest.
    pub fn to_loop(&self, n: usize, rho: f64) -> (LoopScalar, f64) {
        let m = self.bins.len() as i64;
        let mut f = LoopScalar::zeros(n, rho);
        let mut tail = 0.0;
        for i in -(m / 2)..(m - m / 2) {
            let c = self.get(i);
            if i.unsigned_abs() as usize <= n {
                f.set(i, c);
            } else {
                tail += c.norm() * rho.powi(i.abs() as i32);
            }
        }
        (f, tail)
    }

    /// Σ_i c_i (value at λ = 1).
    pub fn value_at_one(&self) -> C {
        self.bins.iter().sum()
    }

    /// Σ_i i c_i (λ-derivative at λ = 1).
    pub fn deriv_at_one(&self) -> C {
        let m = self.bins.len() as i64;
        (-(m / 2)..(m - m / 2)).map(|i| self.get(i) * i as f64).sum()
    }

    /// Spectrum of f* (coefficients reflected and conjugated).
    pub fn star(&self) -> Self {
        let m = self.bins.len() as i64;
        let mut out = Spectrum::zeros(m as usize);
        for i in -(m / 2)..(m - m / 2) {
            out.set(i, self.get(-i).conj());
        }
        out
    }

    /// Spectrum of λ^k f (modes shifted, those leaving the window dropped).
    pub fn shifted(&self, k: i64) -> Self {
        let m = self.bins.len() as i64;
        let mut out = Spectrum::zeros(m as usize);
        for i in -(m / 2)..(m - m / 2) {
            let j = i - k;
            if j >= -(m / 2) && j < m - m / 2 {
                out.set(i, self.get(j));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        Spectrum { bins: self.bins.iter().zip(&other.bins).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: C) -> Self {
        Spectrum { bins: self.bins.iter().map(|a| a * s).collect() }
    }

    /// Largest |c_i| over |i| > n.
    pub fn tail_max(&self, n: usize) -> f64 {
        let m = self.bins.len() as i64;
        (-(m / 2)..(m - m / 2))
            .filter(|i| i.unsigned_abs() as usize > n)
            .map(|i| self.get(i).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn inverse_monomials_cancel() {
        let a = LoopScalar::monomial(1, c(1.0, 0.0), 2, 1.2);
        let b = LoopScalar::monomial(-1, c(1.0, 0.0), 2, 1.2);
        let p = a.mul(&b).unwrap();
        assert_eq!(p, LoopScalar::constant(c(1.0, 0.0), 2, 1.2));
    }

    #[test]
    fn square_of_one_plus_lambda() {
        let f = LoopScalar::from_real_poly(&[1.0, 1.0], 2, 2.0);
        let p = f.mul(&f).unwrap();
        assert_eq!(p.coeff(0), c(1.0, 0.0));
        assert_eq!(p.coeff(1), c(2.0, 0.0));
        assert_eq!(p.coeff(2), c(1.0, 0.0));
        assert!((p.norm() - 9.0).abs() < 1e-14);
        assert!((f.norm().powi(2) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_rho_is_rejected() {
        let f = LoopScalar::zeros(2, 1.2);
        let g = LoopScalar::zeros(2, 1.3);
        assert!(matches!(f.mul(&g), Err(Error::RhoMismatch(..))));
        assert!(f.add(&g).is_err());
    }

    #[test]
    fn star_examples() {
        let l = LoopScalar::monomial(1, c(1.0, 0.0), 2, 1.2);
        assert_eq!(l.star(), LoopScalar::monomial(-1, c(1.0, 0.0), 2, 1.2));
        let k = LoopScalar::constant(c(1.0, 2.0), 2, 1.2);
        assert_eq!(k.star(), LoopScalar::constant(c(1.0, -2.0), 2, 1.2));
        let f = LoopScalar::from_modes(2, 1.2, &[(2, c(3.0, 0.0)), (-1, c(0.0, 1.0))]);
        let want = LoopScalar::from_modes(2, 1.2, &[(-2, c(3.0, 0.0)), (1, c(0.0, -1.0))]);
        assert_eq!(f.star(), want);
    }

    #[test]
    fn projection_splits() {
        let f = LoopScalar::from_modes(1, 1.2, &[(-1, c(2.0, 0.0)), (0, c(3.0, 0.0)), (1, c(4.0, 0.0))]);
        let (m, z, p) = f.project();
        assert_eq!(m, LoopScalar::monomial(-1, c(2.0, 0.0), 1, 1.2));
        assert_eq!(z, c(3.0, 0.0));
        assert_eq!(p, LoopScalar::monomial(1, c(4.0, 0.0), 1, 1.2));
    }

    #[test]
    fn eval_examples() {
        let f = LoopScalar::from_real_poly(&[1.0, -2.0, 1.0], 2, 1.2);
        let (v, d) = f.eval_and_deriv(c(1.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-15 && d.norm() < 1e-15);
        let l = LoopScalar::monomial(1, c(1.0, 0.0), 1, 1.2);
        let (v, d) = l.eval_and_deriv(c(0.0, 1.0)).unwrap();
        assert!((v - c(0.0, 1.0)).norm() < 1e-15);
        assert!((d - c(1.0, 0.0)).norm() < 1e-15);
        assert!(l.eval_and_deriv(c(2.0, 0.0)).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let f = LoopScalar::from_real_poly(&[1.0, 1.0], 1, 1.2);
        let g = CircleGrid::new(8);
        let s = f.to_samples(&g).unwrap();
        for (k, v) in s.iter().enumerate() {
            let want = c(1.0, 0.0) + C::from_polar(1.0, 2.0 * PI * k as f64 / 8.0);
            assert!((v - want).norm() < 1e-14);
        }
        let (back, alias) = LoopScalar::from_samples(&s, &g, 1, 1.2).unwrap();
        assert!(alias < 1e-14);
        assert!(back.sub(&f).unwrap().norm() < 1e-14);
        assert!(LoopScalar::from_samples(&s, &CircleGrid::new(2), 1, 1.2).is_err());
    }

    #[test]
    fn reciprocal_is_geometric_series() {
        let g = CircleGrid::staggered(128);
        let f = LoopScalar::from_real_poly(&[2.0, 1.0], 32, 1.2);
        let s: Vec<C> = f.to_samples(&g).unwrap().into_iter().map(|v| v.inv()).collect();
        let (r, tail) = LoopScalar::from_samples(&s, &g, 32, 1.2).unwrap();
        // Dropped modes 33..64 weigh Σ 0.5·0.6^i.
        let want_tail: f64 = (33..64).map(|i| 0.5 * 0.6f64.powi(i)).sum();
        assert!((tail - want_tail).abs() < 1e-3 * want_tail, "{tail:e}");
        for i in 0..=32i64 {
            let want = 0.5 * (-0.5f64).powi(i as i32);
            assert!((r.coeff(i) - c(want, 0.0)).norm() < 1e-14);
        }
        for i in 1..=32i64 {
            assert!(r.coeff(-i).norm() < 1e-14);
        }
    }

    #[test]
    fn conj_index_pairs_conjugates() {
        for g in [CircleGrid::new(16), CircleGrid::staggered(16)] {
            for k in 0..16 {
                assert!((g.point(g.conj_index(k)) - g.point(k).conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn subspace_tags() {
        let f = LoopScalar::from_real_poly(&[1.0, 2.0], 3, 1.2);
        assert!(f.in_subspace(Subspace::RealPlus, TAIL_TOL));
        assert!(!f.in_subspace(Subspace::StrictPlus, TAIL_TOL));
        assert!(!f.scale(c(0.0, 1.0)).in_subspace(Subspace::Real, TAIL_TOL));
    }
}
