//! The potential ξ = η + tχ on the plumbed surface.
//!
//! For t > 0 the graph must be a tree, so the plumbed surface is a sphere and
//! every 1-form is rational. Each pole is stored in the chart it belongs to
//! and carried to any other coordinate through the chain of elementary
//! Möbius maps (z ↦ z_jk, z_jk ↦ t_jk/z_jk, z'_jk ↦ z), one step at a time.
//! At t = 0 the surface has nodes and the per-sphere closed forms are used.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::loopgroup::Dpw;
use crate::potentials::rational::{Mobius, PointForm, Pt};
use crate::potentials::unknowns::{poly, Layout, UnknownVector};
use crate::potentials::EPS;
use crate::C;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Coordinate systems of the plumbed surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coord {
    /// z on the sphere of vertex j.
    Vertex(usize),
    /// z on the sphere of edge e (nodes at ±1).
    Sphere(usize),
    /// z_jk = −2i(z − p)/(z + p) near the node of directed edge d on the vertex sphere.
    Node(usize),
    /// z'_jk = −2i(z − p')/(z + p') near the node of directed edge d on the edge sphere.
    NodePrime(usize),
}

/// z ↦ −2i(z − p)/(z + p).
pub fn node_map(p: C) -> Mobius {
    Mobius::new(-2.0 * I, 2.0 * I * p, C::new(1.0, 0.0), p)
}

fn dpw(alpha: C, beta: C, gamma: C) -> Dpw {
    Dpw::new(alpha, beta, gamma)
}

/// (f(λ) + conj f(λ̄))/2 for a function given on all of ℂ.
fn re_op(f: impl Fn(C) -> C, lambda: C) -> C {
    (f(lambda) + f(lambda.conj()).conj()) * 0.5
}

/// λ-values of all parameters at one λ.
#[derive(Clone, Debug)]
pub struct Params {
    pub lambda: C,
    /// Node periods m_d = (a, ib, ic) per directed edge.
    pub m: Vec<Dpw>,
    /// M_j = (0, 1/2, λC_j) per vertex.
    pub m_vertex: Vec<Dpw>,
    /// M_e = (iA, λB, C) per edge sphere.
    pub m_sphere: Vec<Dpw>,
    pub q: Vec<C>,
    /// Ray pole positions and the (a, ib) coefficients with a = (λ−1)²â.
    pub ray_p: Vec<C>,
    pub ray_a: Vec<C>,
    pub ray_ib: Vec<C>,
}

/// Evaluates every parameter at λ, with C_j and B_e given by their regularity formulas at time t.
pub fn params_at(layout: &Layout, x: &UnknownVector, t: f64, lambda: C) -> Params {
    let lm1 = (lambda - 1.0) * (lambda - 1.0);
    let m: Vec<Dpw> = x.dedges.iter().map(|d| dpw(poly(&d.a, lambda), I * poly(&d.b, lambda), I * poly(&d.c, lambda))).collect();
    let nv = layout.n_vertices();
    let mut m_vertex = Vec::with_capacity(nv);
    for j in 0..nv {
        let out: Vec<usize> = (0..layout.dedges.len()).filter(|&d| layout.dedges[d].from == j).collect();
        let g = |l: C| {
            let ra = -t * 0.5 * out.iter().map(|&d| poly(&x.dedges[d].a, l)).sum::<C>();
            let rb = 0.5 - t * 0.5 * out.iter().map(|&d| I * poly(&x.dedges[d].b, l)).sum::<C>();
            (0.25 - ra * ra) / rb
        };
        m_vertex.push(dpw(ZERO, C::new(0.5, 0.0), lambda * re_op(g, lambda)));
    }
    let mut m_sphere = Vec::new();
    let mut q = Vec::new();
    for (e, s) in x.spheres.iter().enumerate() {
        let (d0, d1) = (&x.dedges[2 * e], &x.dedges[2 * e + 1]);
        let g = |l: C| {
            let ra = I * poly(&s.a_cap, l) + t * 0.5 * (poly(&d0.a, l) + poly(&d1.a, l));
            let rg = poly(&s.c_cap, l) + t * 0.5 * I * (poly(&d0.c, l) + poly(&d1.c, l));
            (0.25 - ra * ra) / rg
        };
        let b = re_op(g, lambda);
        m_sphere.push(dpw(I * poly(&s.a_cap, lambda), lambda * b, poly(&s.c_cap, lambda)));
        q.push(I * poly(&s.nu, lambda));
    }
    let ray_p = x.rays.iter().map(|r| (I * poly(&r.theta, lambda)).exp()).collect();
    let ray_a = x.rays.iter().map(|r| lm1 * poly(&r.ahat, lambda)).collect();
    let ray_ib = x.rays.iter().map(|r| I * lm1 * poly(&r.bhat, lambda)).collect();
    Params { lambda, m, m_vertex, m_sphere, q, ray_p, ray_a, ray_ib }
}

/// Mirror pole −1/q, which equals 1/q̄ when ν is real.
fn sigma(q: C) -> Pt {
    if q == ZERO {
        Pt::Inf
    } else {
        Pt::Fin(-q.inv())
    }
}

/// χ residue at 0_j and at ∞_j.
fn chi_vertex(layout: &Layout, p: &Params, j: usize) -> Dpw {
    let mut acc = Dpw::zero();
    for (d, de) in layout.dedges.iter().enumerate() {
        if de.from == j {
            acc = acc - p.m[d].scale(C::new(0.5, 0.0));
        }
    }
    for (r, ri) in layout.rays.iter().enumerate() {
        if ri.vertex == j {
            acc = acc - dpw(ZERO, ZERO, p.ray_ib[r] * 0.5);
        }
    }
    acc
}

fn ray_terms(layout: &Layout, p: &Params, j: usize, scale: f64, form: &mut PointForm) {
    for (r, ri) in layout.rays.iter().enumerate() {
        if ri.vertex == j {
            let pr = p.ray_p[r];
            form.simple.push((pr, dpw(ZERO, ZERO, p.ray_ib[r] * scale)));
            form.double.push((pr, dpw(ZERO, ZERO, p.ray_a[r] * pr * scale)));
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct HomePole {
    home: usize,
    at: Pt,
    double: bool,
    coef: Dpw,
}

/// Route between two coordinates: elementary steps and their composition.
#[derive(Clone, Debug)]
struct Route {
    steps: Vec<Mobius>,
    composed: Mobius,
}

/// The assembled potential for t > 0 on a tree.
pub struct GluedForm<'a> {
    pub layout: &'a Layout,
    pub x: &'a UnknownVector,
    pub t: f64,
    /// Routes indexed [home chart][target coord].
    routes: Vec<Vec<Route>>,
}

impl<'a> GluedForm<'a> {
    pub fn new(layout: &'a Layout, x: &'a UnknownVector, t: f64) -> Result<Self> {
        x.check(layout)?;
        if t <= 0.0 {
            return Err(Error::InvalidParameter(format!("glued potential needs t > 0, got {t}")));
        }
        if !layout.graph.is_tree() {
            return Err(Error::NotATree);
        }
        for d in &x.dedges {
            let td = d.r * t;
            if td <= 0.0 || td >= EPS * EPS {
                return Err(Error::InvalidParameter(format!("gluing parameter t_jk = {td:e} must lie in (0, ε²)")));
            }
        }
        let mut g = GluedForm { layout, x, t, routes: Vec::new() };
        let homes = layout.n_vertices() + layout.n_spheres();
        g.routes = (0..homes).map(|h| g.routes_from(h)).collect();
        Ok(g)
    }

    pub fn n_coords(&self) -> usize {
        self.layout.n_vertices() + 5 * self.layout.n_spheres()
    }

    pub fn index(&self, c: Coord) -> usize {
        let (nv, ne) = (self.layout.n_vertices(), self.layout.n_spheres());
        match c {
            Coord::Vertex(j) => j,
            Coord::Sphere(e) => nv + e,
            Coord::Node(d) => nv + ne + d,
            Coord::NodePrime(d) => nv + 3 * ne + d,
        }
    }

    pub fn coord(&self, i: usize) -> Coord {
        let (nv, ne) = (self.layout.n_vertices(), self.layout.n_spheres());
        if i < nv {
            Coord::Vertex(i)
        } else if i < nv + ne {
            Coord::Sphere(i - nv)
        } else if i < nv + 3 * ne {
            Coord::Node(i - nv - ne)
        } else {
            Coord::NodePrime(i - nv - 3 * ne)
        }
    }

    /// Node position p_jk on the vertex sphere.
    pub fn p(&self, d: usize) -> C {
        C::from_polar(1.0, self.x.dedges[d].theta)
    }

    pub fn t_d(&self, d: usize) -> f64 {
        self.x.dedges[d].r * self.t
    }

    /// Elementary maps leaving a coordinate: (neighbour, map from this coordinate to it).
    fn neighbours(&self, c: Coord) -> Vec<(Coord, Mobius)> {
        let lay = self.layout;
        let mut out = Vec::new();
        match c {
            Coord::Vertex(j) => {
                for (d, de) in lay.dedges.iter().enumerate() {
                    if de.from == j {
                        out.push((Coord::Node(d), node_map(self.p(d))));
                    }
                }
            }
            Coord::Sphere(e) => {
                for d in [2 * e, 2 * e + 1] {
                    out.push((Coord::NodePrime(d), node_map(C::new(lay.dedges[d].node_prime(), 0.0))));
                }
            }
            Coord::Node(d) => {
                out.push((Coord::Vertex(lay.dedges[d].from), node_map(self.p(d)).inverse()));
                out.push((Coord::NodePrime(d), Mobius::new(ZERO, C::new(self.t_d(d), 0.0), C::new(1.0, 0.0), ZERO)));
            }
            Coord::NodePrime(d) => {
                out.push((Coord::Sphere(lay.dedges[d].edge), node_map(C::new(lay.dedges[d].node_prime(), 0.0)).inverse()));
                out.push((Coord::Node(d), Mobius::new(ZERO, C::new(self.t_d(d), 0.0), C::new(1.0, 0.0), ZERO)));
            }
        }
        out
    }

    fn routes_from(&self, home: usize) -> Vec<Route> {
        let n = self.n_coords();
        let mut routes: Vec<Option<Route>> = vec![None; n];
        routes[home] = Some(Route { steps: vec![], composed: Mobius::identity() });
        let mut queue = VecDeque::from([home]);
        while let Some(i) = queue.pop_front() {
            let cur = routes[i].clone().expect("visited");
            for (nb, m) in self.neighbours(self.coord(i)) {
                let k = self.index(nb);
                if routes[k].is_none() {
                    let mut steps = cur.steps.clone();
                    steps.push(m);
                    routes[k] = Some(Route { steps, composed: m.compose(&cur.composed) });
                    queue.push_back(k);
                }
            }
        }
        routes.into_iter().map(|r| r.expect("coordinate tree is connected")).collect()
    }

    pub fn params(&self, lambda: C) -> Params {
        params_at(self.layout, self.x, self.t, lambda)
    }

    fn home_poles(&self, p: &Params) -> Vec<HomePole> {
        let lay = self.layout;
        let t = self.t;
        let mut out = Vec::new();
        for j in 0..lay.n_vertices() {
            let chi = chi_vertex(lay, p, j).scale(C::new(t, 0.0));
            let mj = p.m_vertex[j];
            out.push(HomePole { home: j, at: Pt::Fin(ZERO), double: false, coef: mj + chi });
            out.push(HomePole { home: j, at: Pt::Inf, double: false, coef: chi - mj });
            let mut rays = PointForm::default();
            ray_terms(lay, p, j, t, &mut rays);
            for (a, r) in rays.simple {
                out.push(HomePole { home: j, at: Pt::Fin(a), double: false, coef: r });
            }
            for (b, d) in rays.double {
                out.push(HomePole { home: j, at: Pt::Fin(b), double: true, coef: d });
            }
        }
        let nv = lay.n_vertices();
        for e in 0..lay.n_spheres() {
            let half = (p.m[2 * e] + p.m[2 * e + 1]).scale(C::new(0.5 * t, 0.0));
            let me = p.m_sphere[e];
            out.push(HomePole { home: nv + e, at: Pt::Fin(p.q[e]), double: false, coef: me + half });
            out.push(HomePole { home: nv + e, at: sigma(p.q[e]), double: false, coef: half - me });
        }
        out
    }

    fn place(&self, poles: &[HomePole], target: usize) -> PointForm {
        let mut form = PointForm::default();
        for hp in poles {
            let route = &self.routes[hp.home][target];
            let mut at = hp.at;
            for m in &route.steps {
                at = m.apply(at);
            }
            if !hp.double {
                if let Pt::Fin(w) = at {
                    form.simple.push((w, hp.coef));
                }
                continue;
            }
            let b = hp.at.finite().expect("double poles sit at finite points");
            let h = route.composed;
            match at {
                Pt::Fin(w) => form.double.push((w, hp.coef.scale(h.deriv(b)))),
                Pt::Inf => {
                    let det = h.a * h.d - h.b * h.c;
                    form.constant += hp.coef.scale(h.c * h.c / det);
                }
            }
        }
        form
    }

    /// The potential in one coordinate at one λ.
    pub fn chart(&self, c: Coord, lambda: C) -> PointForm {
        let p = self.params(lambda);
        self.place(&self.home_poles(&p), self.index(c))
    }

    /// The potential in several coordinates at one λ, sharing the parameter evaluation.
    pub fn charts(&self, cs: &[Coord], lambda: C) -> Vec<PointForm> {
        let p = self.params(lambda);
        let poles = self.home_poles(&p);
        cs.iter().map(|c| self.place(&poles, self.index(*c))).collect()
    }

    /// Maps a point between coordinates.
    pub fn transfer(&self, from: Coord, to: Coord, z: Pt) -> Pt {
        let fi = self.index(from);
        let homes = self.layout.n_vertices() + self.layout.n_spheres();
        if fi < homes {
            let mut at = z;
            for m in &self.routes[fi][self.index(to)].steps {
                at = m.apply(at);
            }
            return at;
        }
        // Go through the chart that owns the node coordinate.
        let owner = match from {
            Coord::Node(d) => Coord::Vertex(self.layout.dedges[d].from),
            Coord::NodePrime(d) => Coord::Sphere(self.layout.dedges[d].edge),
            _ => unreachable!(),
        };
        let back = self.routes[self.index(owner)][fi].composed.inverse();
        self.transfer(owner, to, back.apply(z))
    }

    /// Regularity residues R_j (one per vertex) and R_jk (one per edge sphere).
    pub fn regularity(&self) -> RegularityData {
        let p = self.params(ZERO);
        let poles = self.home_poles(&p);
        let lay = self.layout;
        let r_vertex = (0..lay.n_vertices()).map(|j| vertex_residue(&self.place(&poles, j)) / self.t).collect();
        let r_sphere = (0..lay.n_spheres())
            .map(|e| sphere_residue(&self.place(&poles, lay.n_vertices() + e), p.q[e]) / self.t)
            .collect();
        RegularityData { r_vertex, r_sphere }
    }
}

/// Res₀(z⁻¹(z+1)² γ) for the γ entry of a form.
fn vertex_residue(form: &PointForm) -> C {
    let (res, rest) = split_at(form, ZERO);
    res.gamma * 2.0 + rest.gamma
}

/// Res_{w=0}(w⁻¹(w+1)² β̃) with w = (z − q)/(1 + qz).
fn sphere_residue(form: &PointForm, q: C) -> C {
    let g = Mobius::new(C::new(1.0, 0.0), q, -q, C::new(1.0, 0.0));
    let (res, rest) = split_at(&form.pullback(&g), ZERO);
    res.beta * 2.0 + rest.beta
}

/// Residue at z0 and the value at z0 of everything else.
fn split_at(form: &PointForm, z0: C) -> (Dpw, Dpw) {
    let mut res = Dpw::zero();
    let mut rest = PointForm { constant: form.constant, ..Default::default() };
    for (a, r) in &form.simple {
        if (*a - z0).norm() < 1e-14 {
            res += *r;
        } else {
            rest.simple.push((*a, *r));
        }
    }
    for (b, d) in &form.double {
        assert!((*b - z0).norm() >= 1e-14, "double pole at the regularity point");
        rest.double.push((*b, *d));
    }
    (res, rest.eval(z0))
}

/// Regularity residues; R_j ↦ conj(F_j)/2 and R_jk ↦ 0 at the central value as t → 0.
#[derive(Clone, Debug)]
pub struct RegularityData {
    pub r_vertex: Vec<C>,
    pub r_sphere: Vec<C>,
}

/// The noded surface at t = 0: per-sphere potentials and the t-derivative.
pub struct TimeZero<'a> {
    pub layout: &'a Layout,
    pub x: &'a UnknownVector,
}

impl<'a> TimeZero<'a> {
    pub fn new(layout: &'a Layout, x: &'a UnknownVector) -> Result<Self> {
        x.check(layout)?;
        Ok(TimeZero { layout, x })
    }

    pub fn params(&self, lambda: C) -> Params {
        params_at(self.layout, self.x, 0.0, lambda)
    }

    pub fn p(&self, d: usize) -> C {
        C::from_polar(1.0, self.x.dedges[d].theta)
    }

    /// η = M_j dz/z on a vertex sphere.
    pub fn vertex_form(&self, j: usize, lambda: C) -> PointForm {
        let p = self.params(lambda);
        PointForm { simple: vec![(ZERO, p.m_vertex[j])], ..Default::default() }
    }

    /// η = M_e ω_q on an edge sphere.
    pub fn sphere_form(&self, e: usize, lambda: C) -> PointForm {
        let p = self.params(lambda);
        let mut f = PointForm { simple: vec![(p.q[e], p.m_sphere[e])], ..Default::default() };
        if let Pt::Fin(s) = sigma(p.q[e]) {
            f.simple.push((s, -p.m_sphere[e]));
        }
        f
    }

    /// ∂ξ/∂t at t = 0 on a vertex sphere.
    pub fn dt_vertex_form(&self, j: usize, lambda: C) -> PointForm {
        let p = self.params(lambda);
        self.dt_vertex_with(&p, j)
    }

    fn dt_vertex_with(&self, p: &Params, j: usize) -> PointForm {
        let lay = self.layout;
        let mut f = PointForm { simple: vec![(ZERO, chi_vertex(lay, p, j))], ..Default::default() };
        for (d, de) in lay.dedges.iter().enumerate() {
            if de.from == j {
                let pd = self.p(d);
                let q = p.q[de.edge];
                let k = (1.0 + q * q) / (1.0 - q * q) * self.x.dedges[d].r;
                f.simple.push((pd, p.m[d]));
                f.double.push((pd, p.m_sphere[de.edge].scale(k * pd)));
            }
        }
        ray_terms(lay, p, j, 1.0, &mut f);
        f
    }

    /// ∂ξ/∂t at t = 0 on an edge sphere.
    pub fn dt_sphere_form(&self, e: usize, lambda: C) -> PointForm {
        let p = self.params(lambda);
        self.dt_sphere_with(&p, e)
    }

    fn dt_sphere_with(&self, p: &Params, e: usize) -> PointForm {
        let lay = self.layout;
        let (d0, d1) = (2 * e, 2 * e + 1);
        let half = (p.m[d0] + p.m[d1]).scale(C::new(0.5, 0.0));
        let one = C::new(1.0, 0.0);
        let mut f = PointForm { simple: vec![(one, -p.m[d0]), (-one, -p.m[d1]), (p.q[e], half)], ..Default::default() };
        if let Pt::Fin(s) = sigma(p.q[e]) {
            f.simple.push((s, half));
        }
        let (a, b) = (lay.dedges[d0].from, lay.dedges[d1].from);
        f.double.push((one, p.m_vertex[a].scale(C::new(self.x.dedges[d0].r, 0.0))));
        f.double.push((-one, p.m_vertex[b].scale(C::new(-self.x.dedges[d1].r, 0.0))));
        f
    }

    /// Analytic extensions of R_j and R_jk at t = 0.
    pub fn regularity(&self) -> RegularityData {
        let p = self.params(ZERO);
        let lay = self.layout;
        let r_vertex = (0..lay.n_vertices()).map(|j| vertex_residue(&self.dt_vertex_with(&p, j))).collect();
        let r_sphere = (0..lay.n_spheres()).map(|e| sphere_residue(&self.dt_sphere_with(&p, e), p.q[e])).collect();
        RegularityData { r_vertex, r_sphere }
    }
}

/// x_j + iy_j = (1/2 − Res₀α)/Res₀β and C_j for the vertex gauge, at one λ.
pub fn vertex_gauge(form: &PointForm) -> Result<(C, C)> {
    let (res, _) = split_at(form, ZERO);
    if res.beta.norm() < 1e-14 {
        return Err(Error::Singular(res.beta.norm()));
    }
    let xy = (0.5 - res.alpha) / res.beta;
    Ok((xy, (0.25 - res.alpha * res.alpha) / res.beta))
}

/// Largest defect of −conj(ξ(1/z̄, λ̄))/z² = D ξ(z, λ) D⁻¹ over the given points.
pub fn symmetry_defect(form: impl Fn(C) -> PointForm, zs: &[C], lambdas: &[C]) -> f64 {
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let f = form(l);
        let fb = form(l.conj());
        for &z in zs {
            let lhs = fb.matrix(z.conj().inv(), l.conj()).map(|v| -v.conj()) / (z * z);
            let m = f.matrix(z, l);
            let rhs = crate::linalg::mat(m[(0, 0)], -m[(0, 1)], -m[(1, 0)], m[(1, 1)]);
            worst = worst.max(crate::linalg::max_abs(&(lhs - rhs)));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Ray, Vertex, WeightedGraph};
    use crate::linalg::c;
    use crate::potentials::model::ModelPotential;
    use crate::potentials::rational::RationalLoopForm;
    use crate::potentials::{Layout, ModelKind};
    use std::f64::consts::PI;

    fn chain() -> WeightedGraph {
        WeightedGraph::new(
            vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }, Vertex { id: 2, pos: C::new(0.0, 2.0) }],
            vec![Edge { a: 1, b: 2, weight: 1.0 }],
            vec![Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }, Ray { vertex: 2, angle: PI / 2.0, weight: 1.0 }],
        )
        .unwrap()
    }

    fn perturbed(lay: &Layout, n: usize, s: f64) -> UnknownVector {
        let x = UnknownVector::central(lay, n);
        let v: Vec<f64> = x.to_newton(lay).iter().enumerate().map(|(i, a)| a + s * ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        x.with_newton(lay, &v)
    }

    fn lambdas() -> Vec<C> {
        (0..5).map(|k| C::from_polar(1.0, 0.3 + 1.1 * k as f64)).collect()
    }

    #[test]
    fn central_time_zero_is_spherical_and_catenoidal() {
        let lay = Layout::new(&chain()).unwrap();
        let x = UnknownVector::central(&lay, 4);
        let tz = TimeZero::new(&lay, &x).unwrap();
        for l in lambdas() {
            let s = ModelPotential(ModelKind::Spherical).at(l);
            let cat = ModelPotential(ModelKind::Catenoidal).at(l);
            for z in [c(0.3, 0.4), c(-1.2, 0.7)] {
                assert!((tz.vertex_form(0, l).eval(z) - s.eval(z)).norm() < 1e-15);
                assert!((tz.sphere_form(0, l).eval(z) - cat.eval(z)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn residues_sum_to_zero_on_each_chart() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.01);
        let g = GluedForm::new(&lay, &x, 0.02).unwrap();
        for l in lambdas() {
            let p = g.params(l);
            let total = g.home_poles(&p).iter().filter(|h| !h.double).fold(Dpw::zero(), |a, h| a + h.coef);
            assert!(total.norm() < 1e-14);
        }
    }

    #[test]
    fn chi_residue_bookkeeping() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.02);
        let t = 0.01;
        let g = GluedForm::new(&lay, &x, t).unwrap();
        let l = c(0.6, 0.8);
        let p = g.params(l);
        let poles = g.home_poles(&p);
        let at0 = poles.iter().find(|h| h.home == 0 && h.at == Pt::Fin(ZERO)).unwrap().coef;
        let want = p.m_vertex[0] + (-p.m[0].scale(c(0.5, 0.0)) - dpw(ZERO, ZERO, p.ray_ib[0] * 0.5)).scale(c(t, 0.0));
        assert!((at0 - want).norm() < 1e-15);
    }

    #[test]
    fn same_form_in_every_coordinate() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.01);
        let g = GluedForm::new(&lay, &x, 0.02).unwrap();
        let l = c(0.8, -0.6);
        let base = g.chart(Coord::Vertex(0), l);
        for target in [Coord::Sphere(0), Coord::Node(0), Coord::NodePrime(1), Coord::Vertex(1)] {
            let f = g.chart(target, l);
            let route = &g.routes[0][g.index(target)];
            let h = route.composed.inverse();
            for w in [c(0.11, 0.07), c(-0.3, 0.21)] {
                let z = h.apply_c(w);
                let lhs = f.eval(w);
                let rhs = base.eval(z).scale(h.deriv(w));
                assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()), "{target:?}: {lhs:?} vs {rhs:?}");
            }
        }
    }

    #[test]
    fn sigma_symmetry_of_glued_form() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.01);
        let zs = [c(0.3, 0.2), c(1.7, -0.4), c(-0.5, -0.9)];
        for t in [0.0, 0.02] {
            for j in 0..2 {
                let d = if t == 0.0 {
                    let tz = TimeZero::new(&lay, &x).unwrap();
                    symmetry_defect(|l| tz.vertex_form(j, l).add(&tz.dt_vertex_form(j, l).scale(c(0.01, 0.0))), &zs, &lambdas())
                } else {
                    let g = GluedForm::new(&lay, &x, t).unwrap();
                    symmetry_defect(|l| g.chart(Coord::Vertex(j), l), &zs, &lambdas())
                };
                assert!(d < 1e-12, "t={t} vertex {j}: {d}");
            }
        }
    }

    #[test]
    fn t_derivative_matches_finite_difference() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.01);
        let tz = TimeZero::new(&lay, &x).unwrap();
        let l = c(0.0, 1.0);
        let z = c(0.4, 0.5);
        let mut errs = Vec::new();
        for h in [1e-3, 5e-4] {
            let g = GluedForm::new(&lay, &x, h).unwrap();
            let fd = (g.chart(Coord::Vertex(0), l).eval(z) - tz.vertex_form(0, l).eval(z)).scale(c(1.0 / h, 0.0));
            errs.push((fd - tz.dt_vertex_form(0, l).eval(z)).norm());
            let fd = (g.chart(Coord::Sphere(0), l).eval(z) - tz.sphere_form(0, l).eval(z)).scale(c(1.0 / h, 0.0));
            errs.push((fd - tz.dt_sphere_form(0, l).eval(z)).norm());
        }
        // O(h): halving h halves the error.
        assert!(errs[2] < 0.6 * errs[0] + 1e-9 && errs[3] < 0.6 * errs[1] + 1e-9, "{errs:?}");
        assert!(errs[0] < 1e-2 && errs[1] < 1e-2, "{errs:?}");
    }

    #[test]
    fn regularity_at_central_value() {
        let lay = Layout::new(&chain()).unwrap();
        let x = UnknownVector::central(&lay, 4);
        let reg = TimeZero::new(&lay, &x).unwrap().regularity();
        let forces = lay.graph.forces();
        for j in 0..2 {
            assert!((reg.r_vertex[j] - forces[j].conj() * 0.5).norm() < 1e-14);
        }
        assert!(reg.r_sphere[0].norm() < 1e-14);
        // The glued residues converge to the same values.
        let g = GluedForm::new(&lay, &x, 1e-4).unwrap();
        let r = g.regularity();
        assert!((r.r_vertex[0] - reg.r_vertex[0]).norm() < 1e-2);
        assert!((r.r_sphere[0] - reg.r_sphere[0]).norm() < 1e-2);
    }

    #[test]
    fn unbalanced_vertex_residue_is_half_conjugate_force() {
        let g = WeightedGraph::new(
            vec![Vertex { id: 3, pos: C::new(0.0, 0.0) }],
            vec![],
            vec![Ray { vertex: 3, angle: 0.7, weight: 1.3 }, Ray { vertex: 3, angle: 2.9, weight: 0.4 }],
        )
        .unwrap();
        let lay = Layout::new(&g).unwrap();
        let x = UnknownVector::central(&lay, 4);
        let r = TimeZero::new(&lay, &x).unwrap().regularity();
        assert!((r.r_vertex[0] - g.forces()[0].conj() * 0.5).norm() < 1e-14);
    }

    #[test]
    fn gauge_at_time_zero_is_spherical() {
        let lay = Layout::new(&chain()).unwrap();
        let x = perturbed(&lay, 3, 0.01);
        let tz = TimeZero::new(&lay, &x).unwrap();
        let (xy, cj) = vertex_gauge(&tz.vertex_form(1, c(0.6, 0.8))).unwrap();
        assert!((xy - 1.0).norm() < 1e-15 && (cj - 0.5).norm() < 1e-15);
    }

    #[test]
    fn rejects_cycles_for_positive_t() {
        let g = WeightedGraph::new(
            (0..3u32).map(|k| Vertex { id: k + 1, pos: C::from_polar(2.0 / 3f64.sqrt(), 0.3 + 2.0 * PI * k as f64 / 3.0) }).collect(),
            vec![Edge { a: 1, b: 2, weight: 1.0 }, Edge { a: 2, b: 3, weight: 1.0 }, Edge { a: 1, b: 3, weight: 1.0 }],
            vec![],
        )
        .unwrap();
        let lay = Layout::new(&g).unwrap();
        let x = UnknownVector::central(&lay, 2);
        assert!(matches!(GluedForm::new(&lay, &x, 0.01), Err(Error::NotATree)));
        assert!(TimeZero::new(&lay, &x).is_ok());
    }
}
