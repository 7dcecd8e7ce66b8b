//! The spherical, catenoidal and Delaunay potentials on ℂ* and the closed
//! forms of their holomorphic frames, unitary frames and immersions.
//!
//! Square roots of z use the principal branch (cut along the negative real
//! axis), which is the continuation from z = 1 along any path avoiding the cut.

use crate::error::{Error, Result};
use crate::linalg::{mat, Mat2};
use crate::loopgroup::{Dpw, Gauge};
use crate::potentials::rational::{PointForm, RationalLoopForm};
use crate::C;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Spherical,
    Catenoidal,
    /// [[0, λ⁻¹r + s],[λr + s, 0]] dz/z with r + s = 1/2.
    Delaunay { r: f64, s: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct ModelPotential(pub ModelKind);

pub fn model_potential(kind: ModelKind) -> Result<ModelPotential> {
    if let ModelKind::Delaunay { r, s } = kind {
        if (r + s - 0.5).abs() > 1e-12 || r * s == 0.0 {
            return Err(Error::InvalidParameter(format!("Delaunay parameters need r + s = 1/2 and rs ≠ 0, got r={r}, s={s}")));
        }
    }
    Ok(ModelPotential(kind))
}

impl ModelPotential {
    /// Residue at z = 0.
    pub fn residue(&self, lambda: C) -> Dpw {
        let h = C::new(0.5, 0.0);
        match self.0 {
            ModelKind::Spherical => Dpw::new(C::new(0.0, 0.0), h, lambda * 0.5),
            ModelKind::Catenoidal => Dpw::new(C::new(0.0, 0.0), lambda * 0.5, h),
            ModelKind::Delaunay { r, s } => Dpw::new(C::new(0.0, 0.0), lambda * s + r, lambda * r + s),
        }
    }
}

impl RationalLoopForm for ModelPotential {
    fn at(&self, lambda: C) -> PointForm {
        PointForm { simple: vec![(C::new(0.0, 0.0), self.residue(lambda))], ..Default::default() }
    }
}

fn sqrt_branch(z: C) -> Result<C> {
    if z.norm() == 0.0 {
        return Err(Error::BranchThroughZero);
    }
    Ok(z.sqrt())
}

/// Φ^S(z) = (1/(2√z)) [[z+1, λ⁻¹(z−1)],[λ(z−1), z+1]].
pub fn phi_s(z: C, lambda: C) -> Result<Mat2> {
    let s = sqrt_branch(z)?;
    let k = (s * 2.0).inv();
    Ok(mat((z + 1.0) * k, (z - 1.0) * k / lambda, (z - 1.0) * k * lambda, (z + 1.0) * k))
}

/// Unitary factor F^S(z).
pub fn f_s_frame(z: C, lambda: C) -> Result<Mat2> {
    sqrt_branch(z)?;
    let th = z.arg();
    let k = 1.0 / (2.0f64.sqrt() * (1.0 + z.norm_sqr()).sqrt());
    let zb = z.conj();
    let m = mat((zb + 1.0) * k, (z - 1.0) * k / lambda, (-zb + 1.0) * k * lambda, (z + 1.0) * k);
    let d = crate::linalg::diag(C::from_polar(1.0, th / 2.0), C::from_polar(1.0, -th / 2.0));
    Ok(m * d)
}

/// Positive factor B^S(z).
pub fn b_s(z: C, lambda: C) -> Result<Mat2> {
    sqrt_branch(z)?;
    let r = z.norm();
    let k = 1.0 / ((2.0 * r).sqrt() * (1.0 + r * r).sqrt());
    Ok(mat(C::new(2.0 * r * k, 0.0), C::new(0.0, 0.0), lambda * (r * r - 1.0) * k, C::new((1.0 + r * r) * k, 0.0)))
}

/// Immersion f^S(z) = (1−|z|², −2 Im z, |z−1|²)/(1+|z|²).
pub fn f_s(z: C) -> [f64; 3] {
    let d = 1.0 + z.norm_sqr();
    [(1.0 - z.norm_sqr()) / d, -2.0 * z.im / d, (z - 1.0).norm_sqr() / d]
}

/// Gauss map N^S(z) = (|z|²−1, 2 Im z, 2 Re z)/(1+|z|²).
pub fn n_s(z: C) -> [f64; 3] {
    let d = 1.0 + z.norm_sqr();
    [(z.norm_sqr() - 1.0) / d, 2.0 * z.im / d, 2.0 * z.re / d]
}

/// Φ^C(z) = (1/(2√z)) [[z+1, z−1],[z−1, z+1]].
pub fn phi_c(z: C) -> Result<Mat2> {
    let s = sqrt_branch(z)?;
    let k = (s * 2.0).inv();
    Ok(mat((z + 1.0) * k, (z - 1.0) * k, (z - 1.0) * k, (z + 1.0) * k))
}

/// Catenoid Gauss map N^C(z) = (1−|z|², 2 Im z, 2 Re z)/(1+|z|²).
pub fn n_c(z: C) -> [f64; 3] {
    let d = 1.0 + z.norm_sqr();
    [(1.0 - z.norm_sqr()) / d, 2.0 * z.im / d, 2.0 * z.re / d]
}

/// Inverse stereographic projection (2 Re z, 2 Im z, |z|²−1)/(1+|z|²).
pub fn inv_stereo(z: C) -> [f64; 3] {
    let d = 1.0 + z.norm_sqr();
    [2.0 * z.re / d, 2.0 * z.im / d, (z.norm_sqr() - 1.0) / d]
}

/// The regularizing gauge G^S = [[(1+z)/√z, 0],[λ(1−z)/√z, √z/(1+z)]].
pub struct SphericalGauge;

impl Gauge for SphericalGauge {
    fn value(&self, z: C, lambda: C) -> (Mat2, Mat2) {
        let s = z.sqrt();
        let zero = C::new(0.0, 0.0);
        let g = mat((z + 1.0) / s, zero, lambda * (-z + 1.0) / s, s / (z + 1.0));
        let zs = z * s * 2.0;
        let dg = mat(
            (z - 1.0) / zs,
            zero,
            -lambda * (z + 1.0) / zs,
            (-z + 1.0) / (s * 2.0 * (z + 1.0) * (z + 1.0)),
        );
        (g, dg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};

    #[test]
    fn phi_s_examples() {
        let l = c(0.6, 0.8);
        assert!(max_abs(&(phi_s(c(1.0, 0.0), l).unwrap() - Mat2::identity())) < 1e-15);
        let k = 1.0 / (2.0 * 2f64.sqrt());
        let want = mat(c(3.0 * k, 0.0), l.inv() * k, l * k, c(3.0 * k, 0.0));
        assert!(max_abs(&(phi_s(c(2.0, 0.0), l).unwrap() - want)) < 1e-15);
    }

    #[test]
    fn frames_multiply_to_phi() {
        for z in [c(2.0, 0.0), c(0.3, -0.7), c(-1.5, 0.2)] {
            for l in [c(1.0, 0.0), c(0.0, 1.0), C::from_polar(1.0, 2.0)] {
                let p = f_s_frame(z, l).unwrap() * b_s(z, l).unwrap();
                assert!(max_abs(&(p - phi_s(z, l).unwrap())) < 1e-14);
            }
        }
    }

    #[test]
    fn b_s_at_two() {
        let l = c(0.0, 1.0);
        let k = 1.0 / (2.0 * 5f64.sqrt());
        let want = mat(c(4.0 * k, 0.0), c(0.0, 0.0), l * 3.0 * k, c(5.0 * k, 0.0));
        assert!(max_abs(&(b_s(c(2.0, 0.0), l).unwrap() - want)) < 1e-15);
    }

    #[test]
    fn catenoid_gauss_map_is_unit() {
        for k in 0..50 {
            let z = C::from_polar(0.1 + 0.1 * k as f64, 0.37 * k as f64);
            let n = n_c(z);
            assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn delaunay_parameters_checked() {
        assert!(model_potential(ModelKind::Delaunay { r: 0.3, s: 0.3 }).is_err());
        assert!(model_potential(ModelKind::Delaunay { r: 0.5, s: 0.0 }).is_err());
        assert!(model_potential(ModelKind::Delaunay { r: 0.3, s: 0.2 }).is_ok());
    }
}
