//! The generator paths on the plumbed surface and their principal solutions.
//!
//! Per vertex j and direction k the path α_jk leaves 1_j radially to |z| = R,
//! turns counterclockwise to the angle arg u_jk + ε_j and comes back radially
//! to the unit circle. Its mirror image σ(α_jk) is never integrated: its
//! principal solution follows from the symmetry of the potential. The path
//! β_jk crosses the two necks of an edge along unit circles and real
//! segments of the neck coordinates.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{eye, inv, Mat2};
use crate::monodromy::ode::{Curve, Stepper, TaylorOptions};
use crate::potentials::unknowns::arg_pos;
use crate::potentials::{Coord, DirSlot, GluedForm, Layout, PointForm, EPS_PRIME};
use crate::wiener::CircleGrid;
use crate::C;

/// Settings shared by every monodromy evaluation.
#[derive(Clone, Debug)]
pub struct MonodromyOptions {
    pub grid: CircleGrid,
    pub taylor: TaylorOptions,
    /// Radius of the outer arc of α_jk.
    pub r_out: f64,
    /// Weight of the loop norm used for the dropped tail.
    pub rho: f64,
}

impl MonodromyOptions {
    pub fn for_modes(n: usize) -> Self {
        MonodromyOptions { grid: CircleGrid::for_modes(n + 4), taylor: TaylorOptions::default(), r_out: 1.5, rho: 1.2 }
    }
}

pub fn slot_index(layout: &Layout, s: DirSlot) -> usize {
    match s {
        DirSlot::DEdge(d) => d,
        DirSlot::Ray(r) => layout.dedges.len() + r,
    }
}

pub fn n_slots(layout: &Layout) -> usize {
    layout.dedges.len() + layout.rays.len()
}

/// Representative of θ + 2πℤ closest to `target`.
pub fn unwrap_near(theta: f64, target: f64) -> f64 {
    theta + 2.0 * PI * ((target - theta) / (2.0 * PI)).round()
}

/// Conjugation f ↦ conj(D f D⁻¹) with D = diag(1, −1).
pub fn conj_d(m: &Mat2) -> Mat2 {
    Mat2::new(m[(0, 0)].conj(), -m[(0, 1)].conj(), -m[(1, 0)].conj(), m[(1, 1)].conj())
}

/// Principal solutions along α_jk (per slot) and β_jk (per edge) at one λ.
#[derive(Clone, Debug)]
pub struct FramesAt {
    pub alpha: Vec<Mat2>,
    pub beta: Vec<Mat2>,
}

/// Angle of the endpoint of α for a slot.
pub(crate) fn alpha_angle(layout: &Layout, s: DirSlot) -> f64 {
    arg_pos(layout.u(s)) + layout.eps_angle(layout.vertex_of(s))
}

/// Node angle θ_d unwrapped next to its direction.
pub(crate) fn node_angle(g: &GluedForm, d: usize) -> f64 {
    unwrap_near(g.x.dedges[d].theta, arg_pos(g.layout.dedges[d].u))
}

/// The five pieces of β for edge e, each in its coordinate.
pub fn beta_pieces(g: &GluedForm, e: usize) -> Result<Vec<(Coord, Curve)>> {
    let lay = g.layout;
    let (d0, d1) = (2 * e, 2 * e + 1);
    if lay.dedges[d0].tau <= 0.0 {
        return Err(Error::InvalidParameter("edges with negative weight are not supported for t > 0".into()));
    }
    let (j, k) = (lay.dedges[d0].from, lay.dedges[d1].from);
    let c = 2.0 * (EPS_PRIME / 2.0).atan();
    let start = alpha_angle(lay, DirSlot::DEdge(d0));
    let end = match lay.predecessor(DirSlot::DEdge(d1)) {
        Some(s) => alpha_angle(lay, s),
        None => 0.0,
    };
    let re = |x: f64| C::new(x, 0.0);
    Ok(vec![
        (Coord::Vertex(j), Curve::unit_arc(start, node_angle(g, d0) + c)),
        (Coord::Node(d0), Curve::Line { from: re(EPS_PRIME), to: re(g.t_d(d0) / EPS_PRIME) }),
        (Coord::Sphere(e), Curve::unit_arc(c, PI - c)),
        (Coord::NodePrime(d1), Curve::Line { from: re(-EPS_PRIME), to: re(-g.t_d(d1) / EPS_PRIME) }),
        (Coord::Vertex(k), Curve::unit_arc(node_angle(g, d1) - c, end)),
    ])
}

/// Integrates every α and β at one λ.
pub fn frames_at(g: &GluedForm, lambda: C, opts: &MonodromyOptions) -> Result<FramesAt> {
    let lay = g.layout;
    let coords: Vec<Coord> = (0..g.n_coords()).map(|i| g.coord(i)).collect();
    let charts = g.charts(&coords, lambda);
    let form = |c: Coord| -> &PointForm { &charts[g.index(c)] };
    let mut st = Stepper::default();
    let to = &opts.taylor;
    let r = opts.r_out;
    let mut alpha = vec![eye(); n_slots(lay)];
    for j in 0..lay.n_vertices() {
        let f = form(Coord::Vertex(j));
        let mut y = st.transport(f, lambda, &Curve::Line { from: C::new(1.0, 0.0), to: C::new(r, 0.0) }, to)?;
        let mut angle = 0.0;
        for &s in &lay.order[j] {
            let phi = alpha_angle(lay, s);
            y *= st.transport(f, lambda, &Curve::Arc { center: C::new(0.0, 0.0), radius: r, from: angle, to: phi }, to)?;
            angle = phi;
            let inward = st.transport(f, lambda, &Curve::Line { from: C::from_polar(r, phi), to: C::from_polar(1.0, phi) }, to)?;
            alpha[slot_index(lay, s)] = y * inward;
        }
    }
    let mut beta = Vec::with_capacity(lay.n_spheres());
    for e in 0..lay.n_spheres() {
        let mut y = eye();
        for (c, curve) in beta_pieces(g, e)? {
            y *= st.transport(form(c), lambda, &curve, to)?;
        }
        beta.push(y);
    }
    Ok(FramesAt { alpha, beta })
}

/// Generator monodromies at one λ, built from the frames at λ and at λ̄.
#[derive(Clone, Debug)]
pub struct Monodromies {
    /// P(δ_jk) per slot.
    pub delta: Vec<Mat2>,
    /// P(δ'_jk) per slot (identity for the first direction at a vertex).
    pub delta_prev: Vec<Mat2>,
    /// P(γ_jk) per slot.
    pub gamma: Vec<Mat2>,
    /// P(Γ_jk) per edge.
    pub big_gamma: Vec<Mat2>,
}

pub fn combine(layout: &Layout, at: &FramesAt, at_conj: &FramesAt) -> Monodromies {
    let ns = n_slots(layout);
    let mut delta = vec![eye(); ns];
    for i in 0..ns {
        // P(σα)(λ) = conj(D P(α)(λ̄) D⁻¹)
        let mirror = conj_d(&at_conj.alpha[i]);
        delta[i] = at.alpha[i] * inv(&mirror);
    }
    let prev = |s: DirSlot| layout.predecessor(s).map(|p| slot_index(layout, p));
    let mut delta_prev = vec![eye(); ns];
    let mut gamma = vec![eye(); ns];
    for j in 0..layout.n_vertices() {
        for &s in &layout.order[j] {
            let i = slot_index(layout, s);
            if let Some(p) = prev(s) {
                delta_prev[i] = delta[p];
            }
            gamma[i] = inv(&delta_prev[i]) * delta[i];
        }
    }
    let big_gamma = (0..layout.n_spheres())
        .map(|e| {
            let mut y = at.alpha[2 * e] * at.beta[e];
            if let Some(p) = prev(DirSlot::DEdge(2 * e + 1)) {
                y *= inv(&at.alpha[p]);
            }
            y
        })
        .collect();
    Monodromies { delta, delta_prev, gamma, big_gamma }
}

/// Frames on a whole grid (with conjugate pairs) and the combined monodromies.
pub fn monodromies_on_grid(g: &GluedForm, opts: &MonodromyOptions) -> Result<Vec<Monodromies>> {
    use rayon::prelude::*;
    let grid = &opts.grid;
    let frames: Vec<FramesAt> = (0..grid.m).into_par_iter().map(|k| frames_at(g, grid.point(k), opts)).collect::<Result<_>>()?;
    Ok((0..grid.m).map(|k| combine(g.layout, &frames[k], &frames[grid.conj_index(k)])).collect())
}

/// Monodromies at a single real λ (for instance λ = 1).
pub fn monodromies_at_real(g: &GluedForm, lambda: f64, opts: &MonodromyOptions) -> Result<Monodromies> {
    let f = frames_at(g, C::new(lambda, 0.0), opts)?;
    Ok(combine(g.layout, &f, &f))
}
