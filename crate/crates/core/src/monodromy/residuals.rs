//! Residual systems of the monodromy and regularity problems.
//!
//! Per directed edge E1 (3N+3 reals), per ray E2 (3N+1), per edge sphere E3
//! (3N+4) and E4 = (Re, Im) of the regularity residue at q (2). Together they
//! match the Newton coordinates of [`UnknownVector`] block by block. The
//! vertex residues R_j and the length defects L_jk are reported separately:
//! they are solved by moving the graph.

use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{diag, expm, inv, logm, mat, sqrtm, Mat2};
use crate::monodromy::paths::{monodromies_on_grid, slot_index, unwrap_near, Monodromies, MonodromyOptions};
use crate::potentials::assemble::{params_at, Params};
use crate::potentials::model::phi_s;
use crate::potentials::unknowns::{arg_pos, Blocks};
use crate::potentials::{DirSlot, GluedForm, Layout, TimeZero, UnknownVector};
use crate::wiener::Spectrum;
use crate::C;

const I: C = C::new(0.0, 1.0);
const TWO_PI_I: C = C::new(0.0, 2.0 * std::f64::consts::PI);

/// All residuals at one (t, x).
#[derive(Clone, Debug)]
pub struct Residuals {
    pub t: f64,
    pub modes: usize,
    pub e1: Vec<Vec<f64>>,
    pub e2: Vec<Vec<f64>>,
    pub e3: Vec<Vec<f64>>,
    pub e4: Vec<[f64; 2]>,
    /// ∂P̃₁₁/∂λ(1) − (ℓ − 2)/2 per edge.
    pub l: Vec<f64>,
    pub r_vertex: Vec<C>,
    pub r_sphere: Vec<C>,
    /// M̌ samples per slot (edges then rays).
    pub m_check: Vec<Vec<Mat2>>,
    /// P_jk samples per edge.
    pub p: Vec<Vec<Mat2>>,
    /// Weighted norm of the modes beyond N in the residual loops (largest over loops).
    pub tail: f64,
    /// Largest imaginary part among components that are real by symmetry.
    pub asymmetry: f64,
}

impl Residuals {
    /// Residual vector in the block layout of the Newton coordinates.
    pub fn newton(&self, layout: &Layout) -> Vec<f64> {
        let b = Blocks::new(layout, self.modes);
        let mut v = vec![0.0; b.total];
        let mut put = |off: usize, xs: &[f64]| v[off..off + xs.len()].copy_from_slice(xs);
        for (d, e) in self.e1.iter().enumerate() {
            put(b.dedge[d], e);
        }
        for (r, e) in self.e2.iter().enumerate() {
            put(b.ray[r], e);
        }
        for (s, e) in self.e3.iter().enumerate() {
            put(b.sphere[s], e);
        }
        for (s, e) in self.e4.iter().enumerate() {
            put(b.sphere_extra[s], e);
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        let it = self.e1.iter().chain(&self.e2).chain(&self.e3).flatten().copied();
        it.chain(self.e4.iter().flatten().copied()).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn e1_max(&self) -> f64 {
        self.e1.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn e2_max(&self) -> f64 {
        self.e2.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn e3_max(&self) -> f64 {
        self.e3.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Collects complex components, keeps their real parts and tracks the imaginary ones.
struct Comps {
    vals: Vec<f64>,
    imag: f64,
}

impl Comps {
    fn new() -> Self {
        Comps { vals: Vec::new(), imag: 0.0 }
    }

    fn push(&mut self, z: C) {
        self.vals.push(z.re);
        self.imag = self.imag.max(z.im.abs());
    }
}

fn spectrum(samples: impl Iterator<Item = C>, shift: f64) -> Spectrum {
    let s: Vec<C> = samples.collect();
    Spectrum::from_samples(&s, shift)
}

/// F = i(M₁₁ + M₁₁*), G = λ(M₁₂ + M₂₁*) of an su(2)-valued candidate on the grid.
fn fg_edge(mc: &[Mat2], lambdas: &[C], shift: f64) -> (Spectrum, Spectrum) {
    let f = spectrum(mc.iter().map(|m| I * (m[(0, 0)] + m[(0, 0)].conj())), shift);
    let g = spectrum(mc.iter().zip(lambdas).map(|(m, l)| l * (m[(0, 1)] + m[(1, 0)].conj())), shift);
    (f, g)
}

fn e1_components(mc: &[Mat2], lambdas: &[C], shift: f64, n: usize, rho: f64) -> (Vec<f64>, f64, f64) {
    let (f, g) = fg_edge(mc, lambdas, shift);
    let m11 = spectrum(mc.iter().map(|m| m[(0, 0)]), shift);
    let m21 = spectrum(mc.iter().map(|m| m[(1, 0)]), shift);
    let mut c = Comps::new();
    (1..=n).for_each(|i| c.push(f.get(i as i64)));
    (1..=n).for_each(|i| c.push(g.get(i as i64)));
    (0..n).for_each(|i| c.push(g.get(-(i as i64)).conj()));
    c.push(I * m11.value_at_one());
    c.push(m21.value_at_one());
    c.push(m21.deriv_at_one());
    let tail = f.to_loop(n, rho).1 + g.to_loop(n + 1, rho).1;
    (c.vals, c.imag, tail)
}

fn e2_components(mc: &[Mat2], lambdas: &[C], shift: f64, n: usize, rho: f64) -> (Vec<f64>, f64, f64) {
    let (f, g) = fg_edge(mc, lambdas, shift);
    let mut c = Comps::new();
    (1..=n).for_each(|i| c.push(f.get(i as i64)));
    (1..=n).for_each(|i| c.push(g.get(i as i64)));
    (1..=n).for_each(|i| c.push(g.get(-(i as i64)).conj()));
    c.push(g.get(0));
    let tail = f.to_loop(n, rho).1 + g.to_loop(n + 1, rho).1;
    (c.vals, c.imag, tail)
}

/// E3 components and L for the samples of P̃.
fn e3_components(pt: &[Mat2], shift: f64, n: usize, rho: f64, length: f64) -> (Vec<f64>, f64, f64, f64) {
    let f = spectrum(pt.iter().map(|m| m[(0, 0)] + m[(0, 0)].conj()), shift);
    let g = spectrum(pt.iter().map(|m| I * (m[(0, 1)] + m[(1, 0)].conj())), shift);
    let p11 = spectrum(pt.iter().map(|m| m[(0, 0)]), shift);
    let p12 = spectrum(pt.iter().map(|m| m[(0, 1)]), shift);
    let mut c = Comps::new();
    (1..=n).for_each(|i| c.push(f.get(i as i64)));
    (1..=n).for_each(|i| c.push(g.get(i as i64)));
    (1..=n).for_each(|i| c.push(g.get(-(i as i64)).conj()));
    c.push(f.get(0));
    c.push(g.get(0));
    c.push(I * p12.value_at_one());
    c.push(I * p12.deriv_at_one());
    let l = p11.deriv_at_one();
    c.imag = c.imag.max(l.im.abs());
    let tail = f.to_loop(n, rho).1 + g.to_loop(n, rho).1;
    (c.vals, l.re - (length - 2.0) / 2.0, c.imag, tail)
}

/// P̃ = log(±P·diag(λ⁻¹, λ)), the sign chosen so the argument is near I.
fn p_tilde(p: &[Mat2], lambdas: &[C]) -> Result<Vec<Mat2>> {
    let q: Vec<Mat2> = p.iter().zip(lambdas).map(|(m, l)| m * diag(l.inv(), *l)).collect();
    let trace: C = q.iter().map(|m| m[(0, 0)] + m[(1, 1)]).sum();
    let s = if trace.re >= 0.0 { 1.0 } else { -1.0 };
    q.iter().map(|m| logm(&(m * C::new(s, 0.0)))).collect()
}

/// Coefficient matrix of ξ^S at z.
fn xi_s(z: C, lambda: C) -> Mat2 {
    mat(C::new(0.0, 0.0), (lambda * 2.0).inv(), lambda * 0.5, C::new(0.0, 0.0)) / z
}

/// 2πi Res_p[Φ^S (R/(z−p) + D/(z−p)²) (Φ^S)⁻¹] conjugated back by Φ^S(p).
fn renormalized_residue(r: Mat2, d: Mat2, p: C, lambda: C) -> Mat2 {
    let a = xi_s(p, lambda);
    (r + a * d - d * a) * TWO_PI_I
}

/// ∫ ω_q from 1 to −1 along the upper half circle.
fn omega_integral(q: C) -> C {
    let r = (-1.0 - q) / (1.0 - q);
    let mut arg = r.arg();
    if arg < 0.0 {
        arg += 2.0 * std::f64::consts::PI;
    }
    C::new(r.norm().ln(), arg) - ((1.0 - q) / (1.0 + q)).ln()
}

fn node_p(x: &UnknownVector, layout: &Layout, d: usize) -> C {
    C::from_polar(1.0, unwrap_near(x.dedges[d].theta, arg_pos(layout.dedges[d].u)))
}

/// M̌ for one slot at t = 0 and one λ.
fn m_check_t0(layout: &Layout, x: &UnknownVector, p: &Params, s: DirSlot) -> Result<Mat2> {
    let l = p.lambda;
    let zero = C::new(0.0, 0.0);
    match s {
        DirSlot::DEdge(d) => {
            let de = &layout.dedges[d];
            let pd = node_p(x, layout, d);
            let q = p.q[de.edge];
            let k = (1.0 + q * q) / (1.0 - q * q) * x.dedges[d].r;
            let dd = p.m_sphere[de.edge].scale(k * pd);
            Ok(renormalized_residue(p.m[d].matrix(l), dd.matrix(l), pd, l))
        }
        DirSlot::Ray(r) => {
            let pr = p.ray_p[r];
            let rr = mat(zero, zero, p.ray_ib[r], zero);
            let dd = mat(zero, zero, p.ray_a[r] * pr, zero);
            let inner = renormalized_residue(rr, dd, pr, l);
            let phi = phi_s(pr, l)?;
            let u = phi_s(layout.rays[r].u, l)?;
            let conj = inv(&u) * phi;
            Ok(conj * inner * inv(&conj) * (l / ((l - 1.0) * (l - 1.0))))
        }
    }
}

/// P_jk at t = 0 and one λ.
fn p_t0(layout: &Layout, x: &UnknownVector, p: &Params, e: usize) -> Result<Mat2> {
    let l = p.lambda;
    let (d0, d1) = (2 * e, 2 * e + 1);
    let u = phi_s(layout.dedges[d0].u, l)?;
    let pj = phi_s(node_p(x, layout, d0), l)?;
    let pk = phi_s(node_p(x, layout, d1), l)?;
    let ex = expm(&(p.m_sphere[e].matrix(l) * omega_integral(p.q[e])));
    Ok(inv(&u) * pj * ex * inv(&pk) * u)
}

/// M̌ for one slot at t > 0 from the monodromies at one λ.
fn m_check_glued(layout: &Layout, x: &UnknownVector, mono: &Monodromies, s: DirSlot, t: f64, lambda: C) -> Result<Mat2> {
    let i = slot_index(layout, s);
    let h = sqrtm(&mono.delta_prev[i])?;
    let mt = h * mono.gamma[i] * inv(&h);
    let mhat = logm(&mt)? / C::new(t, 0.0);
    match s {
        DirSlot::DEdge(d) => {
            let u = phi_s(node_p(x, layout, d), lambda)?;
            Ok(inv(&u) * mhat * u)
        }
        DirSlot::Ray(r) => {
            let u = phi_s(layout.rays[r].u, lambda)?;
            Ok(inv(&u) * mhat * u * (lambda / ((lambda - 1.0) * (lambda - 1.0))))
        }
    }
}

/// P_jk at t > 0 from the monodromies at one λ.
fn p_glued(layout: &Layout, mono: &Monodromies, e: usize, lambda: C) -> Result<Mat2> {
    let (d0, d1) = (2 * e, 2 * e + 1);
    let u = phi_s(layout.dedges[d0].u, lambda)?;
    let left = inv(&sqrtm(&mono.delta[slot_index(layout, DirSlot::DEdge(d0))])?);
    let right = sqrtm(&mono.delta_prev[slot_index(layout, DirSlot::DEdge(d1))])?;
    Ok(inv(&u) * left * mono.big_gamma[e] * right * u)
}

fn all_slots(layout: &Layout) -> Vec<DirSlot> {
    (0..layout.dedges.len()).map(DirSlot::DEdge).chain((0..layout.rays.len()).map(DirSlot::Ray)).collect()
}

/// Evaluates every residual at (t, x). t = 0 uses the closed forms of the noded surface.
pub fn residuals(layout: &Layout, x: &UnknownVector, t: f64, opts: &MonodromyOptions) -> Result<Residuals> {
    x.check(layout)?;
    let grid = &opts.grid;
    grid.check(x.modes + 1)?;
    let lambdas = grid.points();
    let slots = all_slots(layout);
    let (m_check, p, reg): (Vec<Vec<Mat2>>, Vec<Vec<Mat2>>, _) = if t == 0.0 {
        let tz = TimeZero::new(layout, x)?;
        let per_l: Vec<(Vec<Mat2>, Vec<Mat2>)> = lambdas
            .par_iter()
            .map(|&l| {
                let pr = params_at(layout, x, 0.0, l);
                let m = slots.iter().map(|&s| m_check_t0(layout, x, &pr, s)).collect::<Result<Vec<_>>>()?;
                let pp = (0..layout.n_spheres()).map(|e| p_t0(layout, x, &pr, e)).collect::<Result<Vec<_>>>()?;
                Ok((m, pp))
            })
            .collect::<Result<_>>()?;
        let (m, pp) = transpose(per_l, slots.len(), layout.n_spheres());
        (m, pp, tz.regularity())
    } else {
        let g = GluedForm::new(layout, x, t)?;
        let monos = monodromies_on_grid(&g, opts)?;
        let per_l: Vec<(Vec<Mat2>, Vec<Mat2>)> = monos
            .iter()
            .zip(&lambdas)
            .map(|(mono, &l)| {
                let m = slots.iter().map(|&s| m_check_glued(layout, x, mono, s, t, l)).collect::<Result<Vec<_>>>()?;
                let pp = (0..layout.n_spheres()).map(|e| p_glued(layout, mono, e, l)).collect::<Result<Vec<_>>>()?;
                Ok((m, pp))
            })
            .collect::<Result<_>>()?;
        let (m, pp) = transpose(per_l, slots.len(), layout.n_spheres());
        (m, pp, g.regularity())
    };
    let n = x.modes;
    let shift = grid.shift;
    let mut out = Residuals {
        t,
        modes: n,
        e1: vec![],
        e2: vec![],
        e3: vec![],
        e4: vec![],
        l: vec![],
        r_vertex: reg.r_vertex.clone(),
        r_sphere: reg.r_sphere.clone(),
        m_check: m_check.clone(),
        p: p.clone(),
        tail: 0.0,
        asymmetry: 0.0,
    };
    for (i, s) in slots.iter().enumerate() {
        let (v, im, tail) = match s {
            DirSlot::DEdge(_) => e1_components(&m_check[i], &lambdas, shift, n, opts.rho),
            DirSlot::Ray(_) => e2_components(&m_check[i], &lambdas, shift, n, opts.rho),
        };
        out.asymmetry = out.asymmetry.max(im);
        out.tail = out.tail.max(tail);
        match s {
            DirSlot::DEdge(_) => out.e1.push(v),
            DirSlot::Ray(_) => out.e2.push(v),
        }
    }
    for (e, pe) in p.iter().enumerate() {
        let pt = p_tilde(pe, &lambdas)?;
        let (v, l, im, tail) = e3_components(&pt, shift, n, opts.rho, layout.edge_length(e));
        out.e3.push(v);
        out.l.push(l);
        out.asymmetry = out.asymmetry.max(im);
        out.tail = out.tail.max(tail);
        out.e4.push([reg.r_sphere[e].re, reg.r_sphere[e].im]);
    }
    Ok(out)
}

type PerLambda = Vec<(Vec<Mat2>, Vec<Mat2>)>;

fn transpose(per_l: PerLambda, ns: usize, ne: usize) -> (Vec<Vec<Mat2>>, Vec<Vec<Mat2>>) {
    let mut m = vec![Vec::with_capacity(per_l.len()); ns];
    let mut p = vec![Vec::with_capacity(per_l.len()); ne];
    for (ms, ps) in per_l {
        for (i, v) in ms.into_iter().enumerate() {
            m[i].push(v);
        }
        for (i, v) in ps.into_iter().enumerate() {
            p[i].push(v);
        }
    }
    (m, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Ray, Vertex, WeightedGraph};
    use crate::linalg::{c, max_abs};
    use std::f64::consts::PI;

    fn chain() -> WeightedGraph {
        WeightedGraph::new(
            vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }, Vertex { id: 2, pos: C::new(0.0, 2.0) }],
            vec![Edge { a: 1, b: 2, weight: 1.0 }],
            vec![Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }, Ray { vertex: 2, angle: PI / 2.0, weight: 1.0 }],
        )
        .unwrap()
    }

    #[test]
    fn omega_integral_at_zero_is_i_pi() {
        assert!((omega_integral(c(0.0, 0.0)) - c(0.0, PI)).norm() < 1e-15);
        // d/dq at 0 equals 4.
        let h = 1e-6;
        let dq = (omega_integral(c(h, 0.0)) - omega_integral(c(-h, 0.0))) / (2.0 * h);
        assert!((dq - c(4.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn central_value_closed_forms() {
        let lay = Layout::new(&chain()).unwrap();
        let n = 6;
        let x = UnknownVector::central(&lay, n);
        let opts = MonodromyOptions::for_modes(n);
        let r = residuals(&lay, &x, 0.0, &opts).unwrap();
        assert!(r.max_abs() < 1e-12, "{}", r.max_abs());
        for (k, l) in opts.grid.points().into_iter().enumerate() {
            let want = diag(c(1.0, 0.0), c(-1.0, 0.0)) * (TWO_PI_I * (l - 1.0) * (l - 1.0) / (l * 4.0));
            assert!(max_abs(&(r.m_check[0][k] - want)) < 1e-12);
            let want = diag(c(1.0, 0.0), c(-1.0, 0.0)) * (TWO_PI_I * 0.25);
            assert!(max_abs(&(r.m_check[2][k] - want)) < 1e-12);
            let pk = r.p[0][k];
            let d = diag(l, l.inv());
            assert!(max_abs(&(pk - d)).min(max_abs(&(pk + d))) < 1e-12);
        }
        // L = 1 − ℓ/2 = 0 for a length-2 edge.
        assert!(r.l[0].abs() < 1e-12);
    }

    #[test]
    fn glued_residuals_approach_time_zero() {
        let lay = Layout::new(&chain()).unwrap();
        let n = 6;
        let x = UnknownVector::central(&lay, n);
        let opts = MonodromyOptions::for_modes(n);
        let r0 = residuals(&lay, &x, 0.0, &opts).unwrap();
        for t in [1e-2, 1e-3, 1e-4] {
            let start = std::time::Instant::now();
            let r = residuals(&lay, &x, t, &opts).unwrap();
            let dm: f64 = (0..4).map(|s| (0..opts.grid.m).map(|k| max_abs(&(r.m_check[s][k] - r0.m_check[s][k]))).fold(0.0, f64::max)).fold(0.0, f64::max);
            let dp: f64 = (0..opts.grid.m).map(|k| max_abs(&(r.p[0][k] - r0.p[0][k])).min(max_abs(&(r.p[0][k] + r0.p[0][k])))).fold(0.0, f64::max);
            eprintln!("t={t:e} dM={dm:e} dP={dp:e} res={:e} e1={:e} e2={:e} e3={:e} R={:?} Rq={:?} asym={:e} tail={:e} time={:?}", r.max_abs(), r.e1_max(), r.e2_max(), r.e3_max(), r.r_vertex, r.r_sphere, r.asymmetry, r.tail, start.elapsed());
        }
    }
}
