//! Pointwise formulas: the su(2) ↔ ℝ³ identification, the Sym–Bobenko
//! immersion and normal at λ = 1, the affine map to the final picture and the
//! dressing action.

use crate::error::Result;
use crate::linalg::{inv, Mat2};
use crate::loopgroup::{iwasawa, IwasawaOptions, LoopMatrix};
use crate::wiener::CircleGrid;
use crate::C;

const I: C = C::new(0.0, 1.0);

/// x ↦ −i [[−x₃, x₁ + i x₂], [x₁ − i x₂, x₃]].
pub fn r3_to_su2(x: [f64; 3]) -> Mat2 {
    let m = Mat2::new(C::new(-x[2], 0.0), C::new(x[0], x[1]), C::new(x[0], -x[1]), C::new(x[2], 0.0));
    m * (-I)
}

/// Inverse of [`r3_to_su2`], reading the hermitian part of i·m.
pub fn su2_to_r3(m: &Mat2) -> [f64; 3] {
    let h = m * I;
    let up = (h[(0, 1)] + h[(1, 0)].conj()) * 0.5;
    [up.re, up.im, ((h[(1, 1)] - h[(0, 0)]) * 0.5).re]
}

/// Sym(F) = −2i ∂_λF F⁻¹ at λ = 1.
pub fn sym(f1: &Mat2, df1: &Mat2) -> [f64; 3] {
    su2_to_r3(&(df1 * inv(f1) * (-2.0 * I)))
}

/// Nor(F) = −i F diag(−1, 1) F⁻¹ at λ = 1.
pub fn nor(f1: &Mat2) -> [f64; 3] {
    let d = Mat2::new(C::new(-1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0));
    su2_to_r3(&(f1 * d * inv(f1) * (-I)))
}

/// Ψ(x) = (1 − x₃, −x₂, −x₁).
pub fn psi(x: [f64; 3]) -> [f64; 3] {
    [1.0 - x[2], -x[1], -x[0]]
}

/// Linear part of Ψ, used for normals.
pub fn psi_linear(x: [f64; 3]) -> [f64; 3] {
    [-x[2], -x[1], -x[0]]
}

/// Dressing action H·x = H x H⁻¹ − 2i ∂_λH H⁻¹ at λ = 1.
pub fn dress(h1: &Mat2, dh1: &Mat2, x: [f64; 3]) -> [f64; 3] {
    let hi = inv(h1);
    su2_to_r3(&(h1 * r3_to_su2(x) * hi + dh1 * hi * (-2.0 * I)))
}

/// Position and normal of the final surface at one point, with quality figures.
#[derive(Clone, Copy, Debug, Default)]
pub struct FramePoint {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    /// Worst ‖FᴴF − I‖ over the sample circle.
    pub unitarity: f64,
    /// Aliasing norm of the sampled Φ.
    pub aliasing: f64,
}

/// Iwasawa-splits a loop given by samples of Φ and evaluates Ψ∘Sym and the normal.
pub fn frame_point(samples: &[Mat2], grid: &CircleGrid, n: usize, rho: f64) -> Result<FramePoint> {
    let (phi, aliasing) = LoopMatrix::from_samples(samples, grid, n, rho)?;
    let (f, _, _) = iwasawa(&phi, IwasawaOptions::default())?;
    let (f1, df1) = f.eval_and_deriv(C::new(1.0, 0.0))?;
    Ok(FramePoint {
        position: psi(sym(&f1, &df1)),
        normal: psi_linear(nor(&f1)),
        unitarity: f.unitarity_defect(grid)?,
        aliasing,
    })
}
