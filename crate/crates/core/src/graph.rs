//! Weighted horizontal graphs: vertices in the plane, weighted edges and rays.
//! Points of ℝ² are stored as complex numbers.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C;

pub const BALANCE_TOL: f64 = 1e-9;
pub const RANK_CUTOFF: f64 = 1e-8;
pub const DEFORM_TOL: f64 = 1e-12;
/// Minimal angular clearance of every direction from ±1 before the
/// normalization rotation kicks in.
pub const AXIS_CLEARANCE: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: u32,
    pub pos: C,
}

/// Edge between two vertex ids, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub vertex: u32,
    /// Direction angle in radians.
    pub angle: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub rays: Vec<Ray>,
}

#[derive(Serialize, Deserialize)]
struct VertexFile {
    id: u32,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    a: u32,
    b: u32,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct RayFile {
    vertex: u32,
    angle_deg: f64,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<VertexFile>,
    #[serde(default)]
    edges: Vec<EdgeFile>,
    #[serde(default)]
    rays: Vec<RayFile>,
}

/// What a direction at a vertex points along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirKind {
    /// Index into `edges`, with the neighbour's vertex index.
    Edge { edge: usize, other: usize },
    /// Index into `rays`.
    Ray { ray: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct Direction {
    pub kind: DirKind,
    pub u: C,
    pub weight: f64,
}

/// Targets for [`WeightedGraph::deform`], indexed like `vertices` / `edges`.
#[derive(Clone, Debug)]
pub struct DeformTargets {
    pub forces: Vec<C>,
    pub lengths: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Nondegeneracy {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub surjective: bool,
    #[serde(skip)]
    pub jacobian: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(mut vertices: Vec<Vertex>, edges: Vec<Edge>, rays: Vec<Ray>) -> Result<Self> {
        vertices.sort_by_key(|v| v.id);
        let edges = edges
            .into_iter()
            .map(|e| if e.a > e.b { Edge { a: e.b, b: e.a, weight: e.weight } } else { e })
            .collect();
        let g = WeightedGraph { vertices, edges, rays };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GraphFile = serde_json::from_str(text)?;
        Self::new(
            f.vertices.into_iter().map(|v| Vertex { id: v.id, pos: C::new(v.x, v.y) }).collect(),
            f.edges.into_iter().map(|e| Edge { a: e.a, b: e.b, weight: e.weight }).collect(),
            f.rays.into_iter().map(|r| Ray { vertex: r.vertex, angle: r.angle_deg.to_radians(), weight: r.weight }).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let f = GraphFile {
            vertices: self.vertices.iter().map(|v| VertexFile { id: v.id, x: v.pos.re, y: v.pos.im }).collect(),
            edges: self.edges.iter().map(|e| EdgeFile { a: e.a, b: e.b, weight: e.weight }).collect(),
            rays: self.rays.iter().map(|r| RayFile { vertex: r.vertex, angle_deg: r.angle.to_degrees(), weight: r.weight }).collect(),
        };
        serde_json::to_string_pretty(&f).expect("graph serializes")
    }

    fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidGraph(s));
        if self.vertices.is_empty() {
            return bad("no vertices".into());
        }
        for w in self.vertices.windows(2) {
            if w[0].id == w[1].id {
                return bad(format!("duplicate vertex id {}", w[0].id));
            }
        }
        for v in &self.vertices {
            if v.id == 0 {
                return bad("vertex ids must be positive".into());
            }
            if !v.pos.re.is_finite() || !v.pos.im.is_finite() {
                return bad(format!("vertex {} has non-finite position", v.id));
            }
        }
        let mut seen = BTreeMap::new();
        for e in &self.edges {
            if e.a == e.b {
                return bad(format!("self-loop at {}", e.a));
            }
            if self.index_of(e.a).is_none() || self.index_of(e.b).is_none() {
                return bad(format!("edge {}-{} references a missing vertex", e.a, e.b));
            }
            if e.weight == 0.0 || !e.weight.is_finite() {
                return bad(format!("edge {}-{} has invalid weight", e.a, e.b));
            }
            if seen.insert((e.a, e.b), ()).is_some() {
                return bad(format!("duplicate edge {}-{}", e.a, e.b));
            }
        }
        for r in &self.rays {
            if self.index_of(r.vertex).is_none() {
                return bad(format!("ray references missing vertex {}", r.vertex));
            }
            if r.weight == 0.0 || !r.weight.is_finite() || !r.angle.is_finite() {
                return bad(format!("ray at {} has invalid weight or angle", r.vertex));
            }
        }
        for (k, _) in self.edges.iter().enumerate() {
            if self.edge_length(k) <= 0.0 {
                return bad(format!("edge {k} has zero length"));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.vertices.binary_search_by_key(&id, |v| v.id).ok()
    }

    fn vidx(&self, id: u32) -> usize {
        self.index_of(id).expect("validated vertex id")
    }

    pub fn edge_ends(&self, e: usize) -> (usize, usize) {
        (self.vidx(self.edges[e].a), self.vidx(self.edges[e].b))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_ends(e);
        (self.vertices[b].pos - self.vertices[a].pos).norm()
    }

    /// Unit vector from the smaller-id end towards the larger-id end.
    pub fn edge_direction(&self, e: usize) -> C {
        let (a, b) = self.edge_ends(e);
        let d = self.vertices[b].pos - self.vertices[a].pos;
        d / d.norm()
    }

    /// All directions leaving vertex `j` (edges first, then rays, input order).
    pub fn directions(&self, j: usize) -> Vec<Direction> {
        let mut out = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            let (a, b) = self.edge_ends(k);
            if a == j {
                out.push(Direction { kind: DirKind::Edge { edge: k, other: b }, u: self.edge_direction(k), weight: e.weight });
            } else if b == j {
                out.push(Direction { kind: DirKind::Edge { edge: k, other: a }, u: -self.edge_direction(k), weight: e.weight });
            }
        }
        for (k, r) in self.rays.iter().enumerate() {
            if self.vidx(r.vertex) == j {
                out.push(Direction { kind: DirKind::Ray { ray: k }, u: C::from_polar(1.0, r.angle), weight: r.weight });
            }
        }
        out
    }

    /// F_j = Σ τ_jk u_jk over edges and rays at j.
    pub fn forces(&self) -> Vec<C> {
        (0..self.vertices.len()).map(|j| self.directions(j).iter().map(|d| d.u * d.weight).sum()).collect()
    }

    pub fn max_force(&self) -> f64 {
        self.forces().iter().map(|f| f.norm()).fold(0.0, f64::max)
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.max_force() <= tol
    }

    pub fn is_tree(&self) -> bool {
        let n = self.vertices.len();
        if self.edges.len() + 1 != n {
            return false;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for k in 0..self.edges.len() {
            let (a, b) = self.edge_ends(k);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    /// Parameter vector: (x_j, y_j) per vertex, ray angles, then weights of edges and rays.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for v in &self.vertices {
            p.push(v.pos.re);
            p.push(v.pos.im);
        }
        p.extend(self.rays.iter().map(|r| r.angle));
        p.extend(self.edges.iter().map(|e| e.weight));
        p.extend(self.rays.iter().map(|r| r.weight));
        p
    }

    pub fn with_params(&self, p: &[f64]) -> Self {
        let mut g = self.clone();
        let nv = g.vertices.len();
        for (j, v) in g.vertices.iter_mut().enumerate() {
            v.pos = C::new(p[2 * j], p[2 * j + 1]);
        }
        let mut k = 2 * nv;
        for r in g.rays.iter_mut() {
            r.angle = p[k];
            k += 1;
        }
        for e in g.edges.iter_mut() {
            e.weight = p[k];
            k += 1;
        }
        for r in g.rays.iter_mut() {
            r.weight = p[k];
            k += 1;
        }
        g
    }

    /// ((F_j) as x/y pairs, (ℓ_e)).
    pub fn outputs(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in self.forces() {
            out.push(f.re);
            out.push(f.im);
        }
        out.extend((0..self.edges.len()).map(|e| self.edge_length(e)));
        out
    }

    /// Analytic Jacobian of [`outputs`](Self::outputs) with respect to [`params`](Self::params).
    pub fn jacobian(&self) -> DMatrix<f64> {
        let nv = self.vertices.len();
        let ne = self.edges.len();
        let nr = self.rays.len();
        let mut jac = DMatrix::zeros(2 * nv + ne, 2 * nv + nr + ne + nr);
        let ray_angle0 = 2 * nv;
        let edge_w0 = ray_angle0 + nr;
        let ray_w0 = edge_w0 + ne;
        for k in 0..ne {
            let (a, b) = self.edge_ends(k);
            let u = self.edge_direction(k);
            let l = self.edge_length(k);
            let tau = self.edges[k].weight;
            // ∂u/∂v_b = (I − u uᵀ)/ℓ.
            let pu = [[1.0 - u.re * u.re, -u.re * u.im], [-u.re * u.im, 1.0 - u.im * u.im]];
            for r in 0..2 {
                for c in 0..2 {
                    let d = tau * pu[r][c] / l;
                    jac[(2 * a + r, 2 * b + c)] += d;
                    jac[(2 * a + r, 2 * a + c)] -= d;
                    jac[(2 * b + r, 2 * b + c)] -= d;
                    jac[(2 * b + r, 2 * a + c)] += d;
                }
            }
            jac[(2 * a, edge_w0 + k)] += u.re;
            jac[(2 * a + 1, edge_w0 + k)] += u.im;
            jac[(2 * b, edge_w0 + k)] -= u.re;
            jac[(2 * b + 1, edge_w0 + k)] -= u.im;
            let row = 2 * nv + k;
            jac[(row, 2 * b)] += u.re;
            jac[(row, 2 * b + 1)] += u.im;
            jac[(row, 2 * a)] -= u.re;
            jac[(row, 2 * a + 1)] -= u.im;
        }
        for (k, r) in self.rays.iter().enumerate() {
            let j = self.vidx(r.vertex);
            let (s, c) = r.angle.sin_cos();
            jac[(2 * j, ray_angle0 + k)] += -r.weight * s;
            jac[(2 * j + 1, ray_angle0 + k)] += r.weight * c;
            jac[(2 * j, ray_w0 + k)] += c;
            jac[(2 * j + 1, ray_w0 + k)] += s;
        }
        jac
    }

    pub fn nondegeneracy(&self) -> Nondegeneracy {
        let jac = self.jacobian();
        let (rows, cols) = jac.shape();
        let sv: Vec<f64> = if rows == 0 || cols == 0 {
            vec![]
        } else {
            let mut s: Vec<f64> = jac.clone().svd(false, false).singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            s
        };
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank = sv.iter().filter(|&&s| s > RANK_CUTOFF * smax && s > 0.0).count();
        Nondegeneracy { rows, cols, rank, singular_values: sv, surjective: rank == rows, jacobian: jac }
    }

    /// Distance > 2 between edges/rays without common endpoint and angles > 60°
    /// between directions sharing a vertex.
    pub fn pre_embedded(&self) -> bool {
        #[derive(Clone, Copy)]
        enum Piece {
            Seg(C, C),
            Half(C, C),
        }
        let mut pieces: Vec<(Piece, Vec<usize>)> = Vec::new();
        for k in 0..self.edges.len() {
            let (a, b) = self.edge_ends(k);
            pieces.push((Piece::Seg(self.vertices[a].pos, self.vertices[b].pos), vec![a, b]));
        }
        for r in &self.rays {
            let j = self.vidx(r.vertex);
            pieces.push((Piece::Half(self.vertices[j].pos, C::from_polar(1.0, r.angle)), vec![j]));
        }
        for j in 0..self.vertices.len() {
            let d = self.directions(j);
            for x in 0..d.len() {
                for y in x + 1..d.len() {
                    let ang = (d[x].u.conj() * d[y].u).arg().abs();
                    if ang <= PI / 3.0 {
                        return false;
                    }
                }
            }
        }
        for x in 0..pieces.len() {
            for y in x + 1..pieces.len() {
                if pieces[x].1.iter().any(|v| pieces[y].1.contains(v)) {
                    continue;
                }
                let dist = match (pieces[x].0, pieces[y].0) {
                    (Piece::Seg(a, b), Piece::Seg(c, d)) => seg_seg(a, b, c, d),
                    (Piece::Seg(a, b), Piece::Half(p, u)) | (Piece::Half(p, u), Piece::Seg(a, b)) => seg_half(a, b, p, u),
                    (Piece::Half(p, u), Piece::Half(q, w)) => half_half(p, u, q, w),
                };
                if dist <= 2.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let w = C::from_polar(1.0, theta);
        let mut g = self.clone();
        for v in g.vertices.iter_mut() {
            v.pos *= w;
        }
        for r in g.rays.iter_mut() {
            r.angle += theta;
        }
        g
    }

    pub fn translated(&self, d: C) -> Self {
        let mut g = self.clone();
        for v in g.vertices.iter_mut() {
            v.pos += d;
        }
        g
    }

    /// Angle of all edge and ray directions.
    pub fn direction_angles(&self) -> Vec<f64> {
        (0..self.vertices.len()).flat_map(|j| self.directions(j).into_iter().map(|d| d.u.arg())).collect()
    }

    /// Smallest angular distance of any direction from the real axis (±1).
    pub fn axis_clearance(&self) -> f64 {
        self.direction_angles()
            .iter()
            .map(|&a| {
                let m = a.rem_euclid(PI);
                m.min(PI - m)
            })
            .fold(PI / 2.0, f64::min)
    }

    /// Rotation angle applied before solving: zero when every direction keeps
    /// at least [`AXIS_CLEARANCE`] from ±1, otherwise the angle on a 0.5° grid
    /// that maximizes that clearance.
    pub fn normalization_angle(&self) -> f64 {
        if self.axis_clearance() >= AXIS_CLEARANCE {
            return 0.0;
        }
        let mut best = (0.0, -1.0);
        for k in 0..360 {
            let th = (k as f64 * 0.5).to_radians();
            let c = self.rotated(th).axis_clearance();
            if c > best.1 + 1e-12 {
                best = (th, c);
            }
        }
        best.0
    }

    /// Gauss–Newton with least-norm steps so that forces and edge lengths hit
    /// the targets.
    pub fn deform(&self, targets: &DeformTargets) -> Result<Self> {
        let nv = self.vertices.len();
        if targets.forces.len() != nv || targets.lengths.len() != self.edges.len() {
            return Err(Error::InvalidParameter("deformation targets do not match the graph".into()));
        }
        let mut want = Vec::new();
        for f in &targets.forces {
            want.push(f.re);
            want.push(f.im);
        }
        want.extend(&targets.lengths);
        let want = DVector::from_vec(want);
        let mut g = self.clone();
        let needed = want.len();
        for _ in 0..30 {
            let r = DVector::from_vec(g.outputs()) - &want;
            if r.amax() < DEFORM_TOL {
                return Ok(g);
            }
            let jac = g.jacobian();
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.max();
            let rank = svd.singular_values.iter().filter(|&&s| s > RANK_CUTOFF * smax).count();
            if rank < needed {
                return Err(Error::Degenerate { rank, needed });
            }
            let step = svd.solve(&r, RANK_CUTOFF * smax).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let p: Vec<f64> = g.params().iter().zip(step.iter()).map(|(a, s)| a - s).collect();
            g = g.with_params(&p);
        }
        let r = DVector::from_vec(g.outputs()) - &want;
        if r.amax() < 1e3 * DEFORM_TOL {
            return Ok(g);
        }
        Err(Error::MaxIterations { iterations: 30, residual: r.amax() })
    }
}

fn point_seg(p: C, a: C, b: C) -> f64 {
    let d = b - a;
    let t = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn point_half(p: C, o: C, u: C) -> f64 {
    let t = ((p - o) * u.conj()).re.max(0.0);
    (p - (o + u * t)).norm()
}

fn cross(a: C, b: C) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Proper intersection test for two segments.
fn segs_cross(a: C, b: C, c: C, d: C) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn seg_seg(a: C, b: C, c: C, d: C) -> f64 {
    if segs_cross(a, b, c, d) {
        return 0.0;
    }
    point_seg(a, c, d).min(point_seg(b, c, d)).min(point_seg(c, a, b)).min(point_seg(d, a, b))
}

fn seg_half(a: C, b: C, o: C, u: C) -> f64 {
    // Long enough segment stands in for the half-line.
    let far = o + u * (1e3 * (1.0 + (a - o).norm() + (b - o).norm()));
    seg_seg(a, b, o, far).min(point_half(a, o, u)).min(point_half(b, o, u))
}

fn half_half(p: C, u: C, q: C, w: C) -> f64 {
    let r = 1e3 * (1.0 + (p - q).norm());
    let d = seg_seg(p, p + u * r, q, q + w * r);
    if d == 0.0 {
        return 0.0;
    }
    // Diverging half-lines attain their distance at an endpoint.
    point_half(p, q, w).min(point_half(q, p, u)).min(if cross(u, w).abs() < 1e-14 { d } else { f64::INFINITY })
}
