//! 2×2 loop matrices, the Iwasawa splitting Φ = F·B, loop log/exp, gauges and
//! the dual potential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::wiener::{CircleGrid, LoopScalar, Spectrum};
use crate::C;

/// Matrix of loops, entries in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopMatrix {
    pub e: [LoopScalar; 4],
}

impl LoopMatrix {
    pub fn zeros(n: usize, rho: f64) -> Self {
        let z = LoopScalar::zeros(n, rho);
        LoopMatrix { e: [z.clone(), z.clone(), z.clone(), z] }
    }

    pub fn constant(m: &Mat2, n: usize, rho: f64) -> Self {
        LoopMatrix {
            e: [
                LoopScalar::constant(m[(0, 0)], n, rho),
                LoopScalar::constant(m[(0, 1)], n, rho),
                LoopScalar::constant(m[(1, 0)], n, rho),
                LoopScalar::constant(m[(1, 1)], n, rho),
            ],
        }
    }

    pub fn identity(n: usize, rho: f64) -> Self {
        Self::constant(&linalg::eye(), n, rho)
    }

    /// Builds from coefficient matrices M_i, i ∈ [−n, n].
    pub fn from_coeff_fn(n: usize, rho: f64, f: impl Fn(i64) -> Mat2) -> Self {
        let mut out = Self::zeros(n, rho);
        for i in -(n as i64)..=(n as i64) {
            out.set_coeff(i, &f(i));
        }
        out
    }

    pub fn n(&self) -> usize {
        self.e.iter().map(|s| s.n()).max().unwrap_or(0)
    }

    pub fn rho(&self) -> f64 {
        self.e[0].rho()
    }

    pub fn coeff(&self, i: i64) -> Mat2 {
        Mat2::new(self.e[0].coeff(i), self.e[1].coeff(i), self.e[2].coeff(i), self.e[3].coeff(i))
    }

    pub fn set_coeff(&mut self, i: i64, m: &Mat2) {
        self.e[0].set(i, m[(0, 0)]);
        self.e[1].set(i, m[(0, 1)]);
        self.e[2].set(i, m[(1, 0)]);
        self.e[3].set(i, m[(1, 1)]);
    }

    pub fn eval(&self, lambda: C) -> Mat2 {
        Mat2::new(self.e[0].eval(lambda), self.e[1].eval(lambda), self.e[2].eval(lambda), self.e[3].eval(lambda))
    }

    /// Value and λ-derivative.
    pub fn eval_and_deriv(&self, lambda: C) -> Result<(Mat2, Mat2)> {
        let mut v = Mat2::zeros();
        let mut d = Mat2::zeros();
        for (k, s) in self.e.iter().enumerate() {
            let (a, b) = s.eval_and_deriv(lambda)?;
            v[(k / 2, k % 2)] = a;
            d[(k / 2, k % 2)] = b;
        }
        Ok((v, d))
    }

    /// Entrywise loop product, truncated to max(N).
    pub fn mul(&self, o: &Self) -> Result<Self> {
        let mut out = Self::zeros(self.n().max(o.n()), self.rho());
        for r in 0..2 {
            for c in 0..2 {
                let a = self.e[2 * r].mul(&o.e[c])?;
                let b = self.e[2 * r + 1].mul(&o.e[2 + c])?;
                out.e[2 * r + c] = a.add(&b)?;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        let mut out = self.clone();
        for k in 0..4 {
            out.e[k] = self.e[k].sub(&o.e[k])?;
        }
        Ok(out)
    }

    /// Max entry norm.
    pub fn norm(&self) -> f64 {
        self.e.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn det(&self) -> Result<LoopScalar> {
        self.e[0].mul(&self.e[3])?.sub(&self.e[1].mul(&self.e[2])?)
    }

    pub fn to_samples(&self, grid: &CircleGrid) -> Result<Vec<Mat2>> {
        let s: Vec<Vec<C>> = self.e.iter().map(|f| f.to_samples(grid)).collect::<Result<_>>()?;
        Ok((0..grid.m).map(|k| Mat2::new(s[0][k], s[1][k], s[2][k], s[3][k])).collect())
    }

    /// Inverse of [`to_samples`](Self::to_samples); also returns the largest entry aliasing norm.
    pub fn from_samples(samples: &[Mat2], grid: &CircleGrid, n: usize, rho: f64) -> Result<(Self, f64)> {
        grid.check(n)?;
        let mut out = Self::zeros(n, rho);
        let mut alias: f64 = 0.0;
        for k in 0..4 {
            let col: Vec<C> = samples.iter().map(|m| m[(k / 2, k % 2)]).collect();
            let (f, a) = Spectrum::from_samples(&col, grid.shift).to_loop(n, rho);
            out.e[k] = f;
            alias = alias.max(a);
        }
        Ok((out, alias))
    }

    /// Max over samples of ‖MᴴM − I‖ and |det M − 1|.
    pub fn unitarity_defect(&self, grid: &CircleGrid) -> Result<f64> {
        Ok(self
            .to_samples(grid)?
            .iter()
            .map(|m| linalg::max_abs(&(m.adjoint() * m - linalg::eye())).max((linalg::det(m) - 1.0).norm()))
            .fold(0.0, f64::max))
    }

    /// Weighted norm of all negative modes, plus the defects of B(0) being
    /// upper triangular with real positive diagonal.
    pub fn plus_defect(&self) -> f64 {
        let neg: f64 = (1..=self.n() as i64)
            .map(|i| linalg::max_abs(&self.coeff(-i)) * self.rho().powi(i as i32))
            .sum();
        let b0 = self.coeff(0);
        let tri = b0[(1, 0)].norm();
        let diag = b0[(0, 0)].im.abs() + b0[(1, 1)].im.abs() + (-b0[(0, 0)].re).max(0.0) + (-b0[(1, 1)].re).max(0.0);
        neg + tri + diag
    }
}

fn default_grid(n: usize) -> CircleGrid {
    CircleGrid::for_modes(2 * n + 2)
}

#[derive(Clone, Copy, Debug)]
pub struct IwasawaOptions {
    /// Upper bound on Toeplitz block rows; 0 means 4N.
    pub max_blocks: usize,
    pub factor_tol: f64,
}

impl Default for IwasawaOptions {
    fn default() -> Self {
        IwasawaOptions { max_blocks: 0, factor_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IwasawaReport {
    pub block_rows: usize,
    pub row_change: f64,
    pub aliasing: f64,
}

/// Splits Φ = F·B with F unitary on the circle and B extending to the disk
/// with B(0) upper triangular, positive diagonal.
///
/// B comes from a block-Toeplitz Cholesky factorisation of the spectral
/// density Φᴴ Φ: the last block row of the finite-section Cholesky factor
/// converges to the conjugate-transposed coefficients of B.
pub fn iwasawa(phi: &LoopMatrix, opts: IwasawaOptions) -> Result<(LoopMatrix, LoopMatrix, IwasawaReport)> {
    let n = phi.n();
    let rho = phi.rho();
    let grid = default_grid(n);
    let phis = phi.to_samples(&grid)?;
    for m in &phis {
        let d = linalg::det(m).norm();
        if d < 1e-13 {
            return Err(Error::Singular(d));
        }
    }
    // Fourier coefficients of W = Φᴴ Φ on the circle: W_k = Σ_i Φ_iᴴ Φ_{i+k}.
    let w: Vec<Mat2> = (-(2 * n as i64)..=(2 * n as i64))
        .map(|k| {
            let mut acc = Mat2::zeros();
            for i in -(n as i64)..=(n as i64) {
                if (i + k).abs() <= n as i64 {
                    acc += phi.coeff(i).adjoint() * phi.coeff(i + k);
                }
            }
            acc
        })
        .collect();
    let wk = |k: i64| -> Mat2 {
        if k.abs() > 2 * n as i64 {
            Mat2::zeros()
        } else {
            w[(k + 2 * n as i64) as usize]
        }
    };
    let max_rows = if opts.max_blocks == 0 { (4 * n).max(8) } else { opts.max_blocks };
    let mut rows: Vec<Vec<Mat2>> = Vec::new();
    let mut prev: Vec<Mat2> = Vec::new();
    let mut report = IwasawaReport::default();
    let mut converged = false;
    for p in 0..max_rows {
        let mut row = vec![Mat2::zeros(); p + 1];
        for q in 0..p {
            let mut s = wk(q as i64 - p as i64);
            for r in 0..q {
                s -= row[r] * rows[q][r].adjoint();
            }
            row[q] = s * linalg::inv(&rows[q][q].adjoint());
        }
        let mut s = wk(0);
        for r in 0..p {
            s -= row[r] * row[r].adjoint();
        }
        row[p] = linalg::chol(&s)?;
        let cand: Vec<Mat2> = (0..=p.min(n)).map(|k| row[p - k].adjoint()).collect();
        let change = (0..cand.len())
            .map(|k| linalg::max_abs(&(cand[k] - prev.get(k).copied().unwrap_or_else(Mat2::zeros))))
            .fold(0.0, f64::max);
        rows.push(row);
        prev = cand;
        report.block_rows = p + 1;
        report.row_change = change;
        if p >= 2 && change < opts.factor_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FactorizationDiverged(report.block_rows));
    }
    let b = LoopMatrix::from_coeff_fn(n, rho, |i| if i >= 0 && (i as usize) < prev.len() { prev[i as usize] } else { Mat2::zeros() });
    let bs = b.to_samples(&grid)?;
    let fs: Vec<Mat2> = phis.iter().zip(&bs).map(|(p, b)| p * linalg::inv(b)).collect();
    let (f, alias) = LoopMatrix::from_samples(&fs, &grid, n, rho)?;
    report.aliasing = alias;
    Ok((f, b, report))
}

/// Pointwise principal logarithm, transformed back to N modes.
pub fn log_loop(phi: &LoopMatrix) -> Result<LoopMatrix> {
    let grid = default_grid(phi.n());
    let s: Vec<Mat2> = phi.to_samples(&grid)?.iter().map(linalg::logm).collect::<Result<_>>()?;
    Ok(LoopMatrix::from_samples(&s, &grid, phi.n(), phi.rho())?.0)
}

pub fn exp_loop(m: &LoopMatrix) -> Result<LoopMatrix> {
    let grid = default_grid(m.n());
    let s: Vec<Mat2> = m.to_samples(&grid)?.iter().map(linalg::expm).collect();
    Ok(LoopMatrix::from_samples(&s, &grid, m.n(), m.rho())?.0)
}

/// DPW-shaped coefficient [[α, β/λ],[γ, −α]] stored as (α, β, γ) so that it
/// remains finite at λ = 0.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Dpw {
    pub alpha: C,
    pub beta: C,
    pub gamma: C,
}

impl Dpw {
    pub fn new(alpha: C, beta: C, gamma: C) -> Self {
        Dpw { alpha, beta, gamma }
    }

    pub fn zero() -> Self {
        Dpw::default()
    }

    pub fn matrix(&self, lambda: C) -> Mat2 {
        Mat2::new(self.alpha, self.beta / lambda, self.gamma, -self.alpha)
    }

    /// [[−α, γ/λ],[β, α]].
    pub fn dual(&self) -> Self {
        Dpw { alpha: -self.alpha, beta: self.gamma, gamma: self.beta }
    }

    pub fn scale(&self, s: C) -> Self {
        Dpw { alpha: self.alpha * s, beta: self.beta * s, gamma: self.gamma * s }
    }

    pub fn norm(&self) -> f64 {
        self.alpha.norm().max(self.beta.norm()).max(self.gamma.norm())
    }
}

impl std::ops::Add for Dpw {
    type Output = Dpw;
    fn add(self, o: Dpw) -> Dpw {
        Dpw { alpha: self.alpha + o.alpha, beta: self.beta + o.beta, gamma: self.gamma + o.gamma }
    }
}

impl std::ops::AddAssign for Dpw {
    fn add_assign(&mut self, o: Dpw) {
        *self = *self + o;
    }
}

impl std::ops::Sub for Dpw {
    type Output = Dpw;
    fn sub(self, o: Dpw) -> Dpw {
        self + o.scale(C::new(-1.0, 0.0))
    }
}

impl std::ops::Neg for Dpw {
    type Output = Dpw;
    fn neg(self) -> Dpw {
        self.scale(C::new(-1.0, 0.0))
    }
}

/// Matrix-valued 1-form A(z, λ) dz evaluated pointwise.
pub trait Potential: Sync {
    fn matrix(&self, z: C, lambda: C) -> Mat2;
}

/// Gauge G(z, λ) together with ∂G/∂z.
pub trait Gauge: Sync {
    fn value(&self, z: C, lambda: C) -> (Mat2, Mat2);
}

/// ξ·G = G⁻¹ξG + G⁻¹dG.
pub struct Gauged<'a> {
    pub form: &'a dyn Potential,
    pub gauge: &'a dyn Gauge,
}

pub fn gauge_action<'a>(form: &'a dyn Potential, gauge: &'a dyn Gauge) -> Gauged<'a> {
    Gauged { form, gauge }
}

impl Potential for Gauged<'_> {
    fn matrix(&self, z: C, lambda: C) -> Mat2 {
        let (g, dg) = self.gauge.value(z, lambda);
        let gi = linalg::inv(&g);
        gi * self.form.matrix(z, lambda) * g + gi * dg
    }
}

/// Pointwise product G₁G₂ of two gauges.
pub struct GaugeProduct<'a>(pub &'a dyn Gauge, pub &'a dyn Gauge);

impl Gauge for GaugeProduct<'_> {
    fn value(&self, z: C, lambda: C) -> (Mat2, Mat2) {
        let (a, da) = self.0.value(z, lambda);
        let (b, db) = self.1.value(z, lambda);
        (a * b, da * b + a * db)
    }
}

pub struct IdentityGauge;

impl Gauge for IdentityGauge {
    fn value(&self, _z: C, _lambda: C) -> (Mat2, Mat2) {
        (linalg::eye(), Mat2::zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, mat};

    #[test]
    fn identity_factors_trivially() {
        let (f, b, _) = iwasawa(&LoopMatrix::identity(4, 1.2), IwasawaOptions::default()).unwrap();
        assert!(f.sub(&LoopMatrix::identity(4, 1.2)).unwrap().norm() < 1e-12);
        assert!(b.sub(&LoopMatrix::identity(4, 1.2)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn factors_multiply_back() {
        // Φ = exp(λ X + Y) with small random-ish matrices.
        let x = mat(c(0.1, 0.2), c(0.3, -0.1), c(-0.2, 0.1), c(-0.1, -0.2));
        let y = mat(c(0.05, 0.0), c(0.1, 0.2), c(0.0, -0.3), c(-0.05, 0.0));
        let n = 16;
        let m = LoopMatrix::from_coeff_fn(n, 1.2, |i| match i {
            0 => y,
            1 => x,
            _ => Mat2::zeros(),
        });
        let phi = exp_loop(&m).unwrap();
        let (f, b, _) = iwasawa(&phi, IwasawaOptions::default()).unwrap();
        let grid = CircleGrid::for_modes(n);
        assert!(f.unitarity_defect(&grid).unwrap() < 1e-9);
        assert!(b.plus_defect() < 1e-9);
        let back = f.mul(&b).unwrap();
        assert!(back.sub(&phi).unwrap().norm() < 1e-8);
    }

    #[test]
    fn log_exp_diagonal() {
        let a = 0.07;
        let m = LoopMatrix::constant(&linalg::diag(c(0.0, 2.0 * std::f64::consts::PI * a), c(0.0, -2.0 * std::f64::consts::PI * a)), 3, 1.2);
        let e = exp_loop(&m).unwrap();
        let back = log_loop(&e).unwrap();
        assert!(back.sub(&m).unwrap().norm() < 1e-13);
        assert!(log_loop(&LoopMatrix::identity(3, 1.2)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn dual_is_involution() {
        let d = Dpw::new(c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0));
        assert_eq!(d.dual().dual(), d);
    }
}
