//! The combinatorial layout derived from a graph, and the vector of free
//! parameters with its Newton coordinates.
//!
//! Every λ-dependent parameter lies in the real plus-space and is stored as
//! its real coefficients c_0..c_N.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirKind, WeightedGraph};
use crate::C;

/// Edge seen from one of its ends. Directed edge `2e` runs a → b, `2e + 1` runs b → a.
#[derive(Clone, Copy, Debug)]
pub struct DEdge {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
    /// True for the a → b orientation (node at +1 on the edge sphere).
    pub forward: bool,
    pub u: C,
    pub tau: f64,
}

impl DEdge {
    /// Node position on the edge sphere.
    pub fn node_prime(&self) -> f64 {
        if self.forward {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RayInfo {
    pub vertex: usize,
    pub u: C,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirSlot {
    DEdge(usize),
    Ray(usize),
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub graph: WeightedGraph,
    pub dedges: Vec<DEdge>,
    pub rays: Vec<RayInfo>,
    /// Directions at each vertex sorted by argument in (0, 2π).
    pub order: Vec<Vec<DirSlot>>,
}

/// Argument in (0, 2π].
pub fn arg_pos(u: C) -> f64 {
    let a = u.arg();
    if a <= 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

impl Layout {
    pub fn new(graph: &WeightedGraph) -> Result<Self> {
        let mut dedges = Vec::new();
        for (e, edge) in graph.edges.iter().enumerate() {
            let (a, b) = graph.edge_ends(e);
            let u = graph.edge_direction(e);
            dedges.push(DEdge { from: a, to: b, edge: e, forward: true, u, tau: edge.weight });
            dedges.push(DEdge { from: b, to: a, edge: e, forward: false, u: -u, tau: edge.weight });
        }
        let mut rays = Vec::new();
        let mut order = vec![Vec::new(); graph.vertices.len()];
        for (j, slots) in order.iter_mut().enumerate() {
            for d in graph.directions(j) {
                if (d.u - 1.0).norm() < 1e-9 {
                    return Err(Error::InvalidGraph("a direction points along +1; rotate the graph first".into()));
                }
                match d.kind {
                    DirKind::Edge { edge, .. } => {
                        let fwd = graph.edge_ends(edge).0 == j;
                        slots.push(DirSlot::DEdge(2 * edge + usize::from(!fwd)));
                    }
                    DirKind::Ray { ray } => slots.push(DirSlot::Ray(ray)),
                }
            }
        }
        for r in &graph.rays {
            rays.push(RayInfo { vertex: graph.index_of(r.vertex).expect("validated"), u: C::from_polar(1.0, r.angle), tau: r.weight });
        }
        let mut lay = Layout { graph: graph.clone(), dedges, rays, order };
        let mut order = std::mem::take(&mut lay.order);
        for slots in order.iter_mut() {
            slots.sort_by(|x, y| arg_pos(lay.u(*x)).total_cmp(&arg_pos(lay.u(*y))));
            for w in slots.windows(2) {
                if arg_pos(lay.u(w[1])) - arg_pos(lay.u(w[0])) < 1e-6 {
                    return Err(Error::InvalidGraph("two directions at a vertex coincide".into()));
                }
            }
        }
        lay.order = order;
        Ok(lay)
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.vertices.len()
    }

    pub fn n_spheres(&self) -> usize {
        self.graph.edges.len()
    }

    pub fn u(&self, s: DirSlot) -> C {
        match s {
            DirSlot::DEdge(d) => self.dedges[d].u,
            DirSlot::Ray(r) => self.rays[r].u,
        }
    }

    pub fn vertex_of(&self, s: DirSlot) -> usize {
        match s {
            DirSlot::DEdge(d) => self.dedges[d].from,
            DirSlot::Ray(r) => self.rays[r].vertex,
        }
    }

    pub fn predecessor(&self, s: DirSlot) -> Option<DirSlot> {
        let slots = &self.order[self.vertex_of(s)];
        let i = slots.iter().position(|x| *x == s).expect("slot belongs to its vertex");
        if i == 0 {
            None
        } else {
            Some(slots[i - 1])
        }
    }

    /// Angular offset of the path endpoints e^{iε}u past each direction.
    pub fn eps_angle(&self, j: usize) -> f64 {
        let mut args: Vec<f64> = self.order[j].iter().map(|s| arg_pos(self.u(*s))).collect();
        args.insert(0, 0.0);
        args.push(2.0 * PI);
        let gap = args.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        (0.4 * gap).min(0.5)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.graph.edge_length(e)
    }
}

/// Unknowns attached to a directed edge j → k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeUnknowns {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Node position p_jk = e^{iθ} on the vertex sphere.
    pub theta: f64,
    /// Gluing ratio r_jk with t_jk = r_jk t.
    pub r: f64,
}

/// Unknowns attached to the sphere of an edge: A, C and q = iν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereUnknowns {
    pub a_cap: Vec<f64>,
    pub c_cap: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Unknowns of a ray: p = e^{iθ(λ)}, a = (λ−1)²â, b = (λ−1)²b̂.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayUnknowns {
    pub theta: Vec<f64>,
    pub ahat: Vec<f64>,
    pub bhat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownVector {
    pub modes: usize,
    pub dedges: Vec<EdgeUnknowns>,
    pub spheres: Vec<SphereUnknowns>,
    pub rays: Vec<RayUnknowns>,
}

fn poly_vec(n: usize, lead: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for (i, x) in lead.iter().enumerate() {
        v[i] = *x;
    }
    v
}

/// Horner evaluation of a real-coefficient polynomial at λ.
pub fn poly(c: &[f64], lambda: C) -> C {
    c.iter().rev().fold(C::new(0.0, 0.0), |acc, &x| acc * lambda + x)
}

/// Offsets of the Newton blocks, shared by unknowns and residuals.
#[derive(Clone, Debug)]
pub struct Blocks {
    pub dedge: Vec<usize>,
    pub ray: Vec<usize>,
    pub sphere: Vec<usize>,
    pub sphere_extra: Vec<usize>,
    pub total: usize,
}

impl Blocks {
    pub fn new(layout: &Layout, n: usize) -> Self {
        let mut off = 0;
        let mut take = |len: usize| {
            let o = off;
            off += len;
            o
        };
        let dedge = (0..layout.dedges.len()).map(|_| take(3 * n + 3)).collect();
        let ray = (0..layout.rays.len()).map(|_| take(3 * n + 1)).collect();
        let sphere = (0..layout.n_spheres()).map(|_| take(3 * n + 4)).collect();
        let sphere_extra = (0..layout.n_spheres()).map(|_| take(2)).collect();
        Blocks { dedge, ray, sphere, sphere_extra, total: off }
    }
}

impl UnknownVector {
    /// Central value of every parameter.
    pub fn central(layout: &Layout, n: usize) -> Self {
        let dedges = layout
            .dedges
            .iter()
            .map(|d| EdgeUnknowns {
                a: poly_vec(n, &[-d.tau / 2.0, d.tau / 2.0]),
                b: vec![0.0; n + 1],
                c: vec![0.0; n + 1],
                theta: d.u.arg(),
                r: d.tau,
            })
            .collect();
        let spheres = (0..layout.n_spheres())
            .map(|_| SphereUnknowns { a_cap: vec![0.0; n + 1], c_cap: poly_vec(n, &[0.5]), nu: vec![0.0; n + 1] })
            .collect();
        let rays = layout
            .rays
            .iter()
            .map(|r| RayUnknowns { theta: poly_vec(n, &[r.u.arg()]), ahat: poly_vec(n, &[r.tau / 2.0]), bhat: vec![0.0; n + 1] })
            .collect();
        UnknownVector { modes: n, dedges, spheres, rays }
    }

    pub fn check(&self, layout: &Layout) -> Result<()> {
        let n = self.modes;
        let bad = |s: &str| Err(Error::LayoutMismatch(s.to_string()));
        if self.dedges.len() != layout.dedges.len() || self.spheres.len() != layout.n_spheres() || self.rays.len() != layout.rays.len() {
            return bad("block counts differ");
        }
        let ok_len = |v: &Vec<f64>| v.len() == n + 1 && v.iter().all(|x| x.is_finite());
        for d in &self.dedges {
            if !(ok_len(&d.a) && ok_len(&d.b) && ok_len(&d.c)) || !d.theta.is_finite() || !d.r.is_finite() {
                return bad("edge unknowns malformed");
            }
        }
        for s in &self.spheres {
            if !(ok_len(&s.a_cap) && ok_len(&s.c_cap) && ok_len(&s.nu)) {
                return bad("sphere unknowns malformed");
            }
        }
        for r in &self.rays {
            if !(ok_len(&r.theta) && ok_len(&r.ahat) && ok_len(&r.bhat)) {
                return bad("ray unknowns malformed");
            }
        }
        Ok(())
    }

    /// Newton coordinates. Per directed edge: a_0..a_N, b_0..b_N, c_0..c_N.
    /// Per ray: â_1..â_N, b̂_1..b̂_N, θ_1..θ_N, b̂_0. Per sphere (a, b):
    /// A_1..A_N, C_1..C_N, ν_1..ν_N, A_0, C_0, θ_ab, θ_ba, then r_ba, ν_0.
    /// Fixed: r_ab = τ, â_0 = τ/2, θ_0 = arg u.
    pub fn to_newton(&self, layout: &Layout) -> Vec<f64> {
        let n = self.modes;
        let mut v = Vec::with_capacity(Blocks::new(layout, n).total);
        for d in &self.dedges {
            v.extend(&d.a);
            v.extend(&d.b);
            v.extend(&d.c);
        }
        for r in &self.rays {
            v.extend(&r.ahat[1..]);
            v.extend(&r.bhat[1..]);
            v.extend(&r.theta[1..]);
            v.push(r.bhat[0]);
        }
        for (e, s) in self.spheres.iter().enumerate() {
            v.extend(&s.a_cap[1..]);
            v.extend(&s.c_cap[1..]);
            v.extend(&s.nu[1..]);
            v.push(s.a_cap[0]);
            v.push(s.c_cap[0]);
            v.push(self.dedges[2 * e].theta);
            v.push(self.dedges[2 * e + 1].theta);
        }
        for (e, s) in self.spheres.iter().enumerate() {
            v.push(self.dedges[2 * e + 1].r);
            v.push(s.nu[0]);
        }
        v
    }

    /// Inverse of [`to_newton`](Self::to_newton); fixed entries come from `self`.
    pub fn with_newton(&self, layout: &Layout, v: &[f64]) -> Self {
        let n = self.modes;
        let mut x = self.clone();
        let mut it = v.iter().copied();
        let mut fill = |dst: &mut [f64]| {
            for y in dst.iter_mut() {
                *y = it.next().expect("newton vector too short");
            }
        };
        for d in x.dedges.iter_mut() {
            fill(&mut d.a);
            fill(&mut d.b);
            fill(&mut d.c);
        }
        for r in x.rays.iter_mut() {
            fill(&mut r.ahat[1..]);
            fill(&mut r.bhat[1..]);
            fill(&mut r.theta[1..]);
            fill(&mut r.bhat[..1]);
        }
        let ne = x.spheres.len();
        for e in 0..ne {
            let mut th = [0.0; 2];
            let s = &mut x.spheres[e];
            fill(&mut s.a_cap[1..]);
            fill(&mut s.c_cap[1..]);
            fill(&mut s.nu[1..]);
            fill(&mut s.a_cap[..1]);
            fill(&mut s.c_cap[..1]);
            fill(&mut th);
            x.dedges[2 * e].theta = th[0];
            x.dedges[2 * e + 1].theta = th[1];
        }
        for e in 0..ne {
            let mut extra = [0.0; 2];
            fill(&mut extra);
            x.dedges[2 * e + 1].r = extra[0];
            x.spheres[e].nu[0] = extra[1];
        }
        debug_assert_eq!(Blocks::new(layout, n).total, v.len());
        x
    }

    /// x − x̄_old + x̄_new, used when the graph moves between outer iterations.
    pub fn recentred(&self, old: &Layout, new: &Layout) -> Self {
        let n = self.modes;
        let c_old = UnknownVector::central(old, n).to_newton(old);
        let c_new = UnknownVector::central(new, n);
        let v: Vec<f64> = self.to_newton(old).iter().zip(&c_old).zip(c_new.to_newton(new)).map(|((x, a), b)| x - a + b).collect();
        c_new.with_newton(new, &v)
    }

    /// Sup distance to another vector in Newton coordinates.
    pub fn distance(&self, other: &Self, layout: &Layout) -> f64 {
        self.to_newton(layout).iter().zip(other.to_newton(layout)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Ray, Vertex};

    pub(crate) fn chain() -> WeightedGraph {
        WeightedGraph::new(
            vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }, Vertex { id: 2, pos: C::new(0.0, 2.0) }],
            vec![Edge { a: 1, b: 2, weight: 1.0 }],
            vec![Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }, Ray { vertex: 2, angle: PI / 2.0, weight: 1.0 }],
        )
        .unwrap()
    }

    #[test]
    fn newton_round_trip_and_size() {
        let lay = Layout::new(&chain()).unwrap();
        let n = 5;
        let x = UnknownVector::central(&lay, n);
        let v = x.to_newton(&lay);
        assert_eq!(v.len(), Blocks::new(&lay, n).total);
        assert_eq!(v.len(), 2 * (3 * n + 3) + 2 * (3 * n + 1) + (3 * n + 4) + 2);
        let w: Vec<f64> = v.iter().enumerate().map(|(i, a)| a + i as f64 * 1e-3).collect();
        let y = x.with_newton(&lay, &w);
        assert_eq!(y.to_newton(&lay), w);
        assert_eq!(y.dedges[0].r, x.dedges[0].r);
        assert_eq!(y.rays[0].ahat[0], x.rays[0].ahat[0]);
    }

    #[test]
    fn central_values() {
        let lay = Layout::new(&chain()).unwrap();
        let x = UnknownVector::central(&lay, 4);
        let l = C::new(0.3, 0.7);
        assert!((poly(&x.dedges[0].a, l) - (l - 1.0) * 0.5).norm() < 1e-15);
        assert!((poly(&x.rays[0].ahat, l) - 0.5).norm() < 1e-15);
        assert_eq!(x.spheres[0].c_cap[0], 0.5);
    }

    #[test]
    fn order_and_predecessors() {
        let lay = Layout::new(&chain()).unwrap();
        // Vertex 1: edge up (π/2) before ray down (3π/2).
        assert_eq!(lay.order[0], vec![DirSlot::DEdge(0), DirSlot::Ray(0)]);
        assert_eq!(lay.predecessor(DirSlot::Ray(0)), Some(DirSlot::DEdge(0)));
        assert_eq!(lay.predecessor(DirSlot::Ray(1)), None);
        assert_eq!(lay.predecessor(DirSlot::DEdge(1)), Some(DirSlot::Ray(1)));
        assert!((lay.eps_angle(0) - 0.5).abs() < 1e-15);
    }
}
