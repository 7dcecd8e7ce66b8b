//! Finite-difference check of the residual Jacobian at (0, x̄) against its
//! closed-form blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::monodromy::paths::MonodromyOptions;
use crate::monodromy::residuals::residuals;
use crate::monodromy::solve::fd_columns;
use crate::potentials::unknowns::Blocks;
use crate::potentials::{Layout, UnknownVector};

/// Relative error of one diagonal block.
#[derive(Clone, Debug, Serialize)]
pub struct BlockCheck {
    pub kind: &'static str,
    pub index: usize,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianCheck {
    pub step: f64,
    pub blocks: Vec<BlockCheck>,
}

impl JacobianCheck {
    pub fn max_error(&self, kind: &str) -> f64 {
        self.blocks.iter().filter(|b| b.kind == kind).map(|b| b.rel_error).fold(0.0, f64::max)
    }
}

/// Predicted block of E1 for one directed edge: rows [F⁺, G⁺, λ(G^{≤0})*, iM₁₁(1), M₂₁(1), ∂M₂₁(1)],
/// columns [a₀..a_N, b₀..b_N, c₀..c_N].
pub fn e1_block(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3 * n + 3, 3 * n + 3);
    let (a, b, c) = (0, n + 1, 2 * n + 2);
    let s = -2.0 * PI;
    for k in 1..=n {
        m[(k - 1, a + k)] = s;
        m[(n + k - 1, b + k)] = s;
        m[(2 * n + k - 1, c + k)] = s;
    }
    m[(n, c)] += s;
    m[(2 * n, b)] += s;
    for i in 0..=n {
        m[(3 * n, a + i)] = s;
        m[(3 * n + 1, c + i)] = s;
        m[(3 * n + 2, c + i)] = s * i as f64;
    }
    m
}

/// Predicted block of E2 for one ray: rows [F⁺, G⁺, (G⁻)*, G⁰], columns [â⁺, b̂⁺, θ⁺, b̂⁰].
pub fn e2_block(n: usize, tau: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3 * n + 1, 3 * n + 1);
    for k in 0..n {
        m[(k, k)] = -PI;
        m[(n + k, 2 * n + k)] = PI / 2.0 * tau;
        m[(2 * n + k, n + k)] = -2.0 * PI;
        m[(2 * n + k, 2 * n + k)] = -PI / 2.0 * tau;
    }
    m[(3 * n, 3 * n)] = -2.0 * PI;
    m
}

/// Predicted block of E3 for one edge sphere: rows [F⁺, G⁺, (G⁻)*, F⁰, G⁰, iP̃₁₂(1), i∂P̃₁₂(1)],
/// columns [A⁺, C⁺, ν⁺, A⁰, C⁰, θ_jk, θ_kj]. The last two rows are only known in the θ columns.
pub fn e3_block(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3 * n + 4, 3 * n + 4);
    let (a, c, nu) = (0, n, 2 * n);
    for k in 0..n {
        m[(k, c + k)] = -2.0;
        m[(n + k, a + k)] = -2.0;
        m[(n + k, nu + k)] = -2.0;
        m[(2 * n + k, a + k)] = -2.0;
        m[(2 * n + k, nu + k)] = 2.0;
    }
    m[(3 * n, 3 * n + 1)] = -4.0;
    m[(3 * n + 1, 3 * n)] = -4.0;
    m[(3 * n + 2, 3 * n + 2)] = -0.5;
    m[(3 * n + 2, 3 * n + 3)] = 0.5;
    m[(3 * n + 3, 3 * n + 2)] = 0.5;
    m[(3 * n + 3, 3 * n + 3)] = 0.5;
    m
}

fn rel_error(fd: &DMatrix<f64>, want: &DMatrix<f64>, rows: usize, cols: usize, mask: impl Fn(usize, usize) -> bool) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..want.nrows() {
        for j in 0..want.ncols() {
            if mask(i, j) {
                num = num.max((fd[(rows + i, cols + j)] - want[(i, j)]).abs());
                den = den.max(want[(i, j)].abs());
            }
        }
    }
    num / den
}

/// Forward-difference Jacobian at (0, x̄) with absolute step h, compared block by block.
pub fn jacobian_check(layout: &Layout, n: usize, h: f64, opts: &MonodromyOptions) -> Result<JacobianCheck> {
    let x = UnknownVector::central(layout, n);
    let v = x.to_newton(layout);
    let f = |w: &[f64]| -> Result<Vec<f64>> { Ok(residuals(layout, &x.with_newton(layout, w), 0.0, opts)?.newton(layout)) };
    let fd = fd_columns(&f, &v, h, false)?;
    let b = Blocks::new(layout, n);
    let mut blocks = Vec::new();
    let e1 = e1_block(n);
    for (d, &off) in b.dedge.iter().enumerate() {
        blocks.push(BlockCheck { kind: "E1", index: d, rel_error: rel_error(&fd, &e1, off, off, |_, _| true) });
    }
    for (r, &off) in b.ray.iter().enumerate() {
        let want = e2_block(n, layout.rays[r].tau);
        blocks.push(BlockCheck { kind: "E2", index: r, rel_error: rel_error(&fd, &want, off, off, |_, _| true) });
    }
    let e3 = e3_block(n);
    for (e, &off) in b.sphere.iter().enumerate() {
        let mask = |i: usize, j: usize| i < 3 * n + 2 || j >= 3 * n + 2;
        blocks.push(BlockCheck { kind: "E3", index: e, rel_error: rel_error(&fd, &e3, off, off, mask) });
    }
    Ok(JacobianCheck { step: h, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Ray, Vertex, WeightedGraph};
    use crate::C;

    #[test]
    fn chain_blocks_match() {
        let g = WeightedGraph::new(
            vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }, Vertex { id: 2, pos: C::new(0.0, 2.0) }],
            vec![Edge { a: 1, b: 2, weight: 1.0 }],
            vec![Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }, Ray { vertex: 2, angle: PI / 2.0, weight: 1.0 }],
        )
        .unwrap();
        let lay = Layout::new(&g).unwrap();
        let n = 4;
        let r = jacobian_check(&lay, n, 1e-6, &MonodromyOptions::for_modes(n)).unwrap();
        for b in &r.blocks {
            assert!(b.rel_error < 1e-4, "{b:?}");
        }
    }
}
