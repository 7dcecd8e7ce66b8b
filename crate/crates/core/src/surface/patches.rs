//! Chart grids and the marching of the holomorphic frame over them.
//!
//! A patch is a polar grid z = center + r_i e^{iφ_k} in one coordinate. Its
//! rows are reached through fans: from the anchor point an approach path leads
//! to a base circle, the frame is carried around that circle to each column
//! angle and then radially to every row of the fan. Rows inside a hole stop
//! the radial march of their column.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{eye, inv, Mat2};
use crate::monodromy::ode::{Curve, Stepper, TaylorOptions};
use crate::monodromy::paths::{alpha_angle, beta_pieces, combine, frames_at, node_angle, slot_index, MonodromyOptions};
use crate::potentials::assemble::node_map;
use crate::potentials::unknowns::poly;
use crate::potentials::{Coord, DirSlot, GluedForm, PointForm, TimeZero, UnknownVector, EPS_PRIME};
use crate::surface::frame::{frame_point, FramePoint};
use crate::wiener::CircleGrid;
use crate::C;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartKind {
    /// Near-spherical piece of a vertex sphere.
    Sphere,
    /// Collar around a Delaunay end.
    End,
    /// Plumbing annulus between a vertex sphere and an edge sphere.
    Neck,
    /// Edge sphere, a small catenoidal piece.
    Catenoid,
    /// Sampling ring used only by the diagnostics.
    Ring,
}

/// Where the frame at the anchor point of a patch comes from.
#[derive(Clone, Copy, Debug)]
pub enum Anchor {
    /// Φ(1_j) in the chart of vertex j.
    One(usize),
    /// Φ at z_jk = ε' in the node chart of a directed edge.
    Node(usize),
    /// Φ at z = i on an edge sphere.
    EdgeSphere(usize),
}

#[derive(Clone, Copy, Debug)]
pub enum Hole {
    Disk { center: C, radius: f64 },
    /// |−2i(z − p)/(z + p)| < radius.
    Node { p: C, radius: f64 },
    /// The disk and its mirror image under z ↦ 1/z̄.
    Pair { center: C, radius: f64 },
}

impl Hole {
    pub fn contains(&self, z: C) -> bool {
        match *self {
            Hole::Disk { center, radius } => (z - center).norm() < radius,
            Hole::Node { p, radius } => node_map(p).apply_c(z).norm() < radius,
            Hole::Pair { center, radius } => (z - center).norm() < radius || (z.conj().inv() - center).norm() < radius,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fan {
    pub base_radius: f64,
    /// From the anchor point to center + base_radius·e^{i start}.
    pub approach: Vec<Curve>,
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub name: String,
    pub kind: PartKind,
    pub coord: Coord,
    pub anchor: Anchor,
    /// Vertex or edge index the patch belongs to.
    pub owner: usize,
    pub center: C,
    pub start: f64,
    /// Column angles, increasing from `start`.
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
    pub fan_of_row: Vec<usize>,
    pub fans: Vec<Fan>,
    pub holes: Vec<Hole>,
}

impl Patch {
    pub fn rows(&self) -> usize {
        self.radii.len()
    }

    pub fn cols(&self) -> usize {
        self.angles.len()
    }

    pub fn z(&self, i: usize, k: usize) -> C {
        self.center + C::from_polar(self.radii[i], self.angles[k])
    }

    pub fn valid(&self, z: C) -> bool {
        !self.holes.iter().any(|h| h.contains(z))
    }

    /// Marches the frame over the grid; entry i·cols + k is None inside holes.
    pub fn march(&self, form: &PointForm, lambda: C, y0: Mat2, to: &TaylorOptions, st: &mut Stepper) -> Result<Vec<Option<Mat2>>> {
        let (nr, nc) = (self.rows(), self.cols());
        let mut out = vec![None; nr * nc];
        for (f, fan) in self.fans.iter().enumerate() {
            let rows: Vec<usize> = (0..nr).filter(|&i| self.fan_of_row[i] == f).collect();
            if rows.is_empty() {
                continue;
            }
            let mut outward: Vec<usize> = rows.iter().copied().filter(|&i| self.radii[i] >= fan.base_radius).collect();
            outward.sort_by(|&a, &b| self.radii[a].total_cmp(&self.radii[b]));
            let mut inward: Vec<usize> = rows.iter().copied().filter(|&i| self.radii[i] < fan.base_radius).collect();
            inward.sort_by(|&a, &b| self.radii[b].total_cmp(&self.radii[a]));
            let mut y = y0;
            for c in &fan.approach {
                y *= st.transport(form, lambda, c, to)?;
            }
            let mut angle = self.start;
            for k in 0..nc {
                let a = self.angles[k];
                y *= st.transport(form, lambda, &Curve::Arc { center: self.center, radius: fan.base_radius, from: angle, to: a }, to)?;
                angle = a;
                for dir in [&outward, &inward] {
                    let mut yr = y;
                    let mut r = fan.base_radius;
                    for &i in dir.iter() {
                        let z = self.z(i, k);
                        if !self.valid(z) {
                            break;
                        }
                        if self.radii[i] != r {
                            yr *= st.transport(form, lambda, &Curve::Line { from: self.center + C::from_polar(r, a), to: z }, to)?;
                            r = self.radii[i];
                        }
                        out[i * nc + k] = Some(yr);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Column angles start + 2π(k + ½)/m, which never run through the anchor ray.
pub fn offset_angles(start: f64, m: usize) -> Vec<f64> {
    (0..m).map(|k| start + 2.0 * PI * (k as f64 + 0.5) / m as f64).collect()
}

/// Radii tan(ϑ/2) for ϑ spread evenly over [margin, π − margin]; symmetric under r ↦ 1/r.
pub fn sphere_radii(rows: usize, margin: f64) -> Vec<f64> {
    (0..rows)
        .map(|i| {
            let th = margin + (PI - 2.0 * margin) * i as f64 / (rows - 1) as f64;
            (th / 2.0).tan()
        })
        .collect()
}

/// Radii spaced evenly in log between `hi` and `lo`.
pub fn log_radii(hi: f64, lo: f64, rows: usize) -> Vec<f64> {
    (0..rows).map(|i| (hi.ln() + (lo.ln() - hi.ln()) * i as f64 / (rows - 1).max(1) as f64).exp()).collect()
}

/// A whole Riemann sphere around 0 with an anchor on the unit circle at angle `start`.
#[allow(clippy::too_many_arguments)]
pub fn sphere_patch(name: String, kind: PartKind, coord: Coord, anchor: Anchor, owner: usize, start: f64, rows: usize, cols: usize, margin: f64, r_out: f64, holes: Vec<Hole>) -> Patch {
    let radii = sphere_radii(rows, margin);
    let fan_of_row = radii.iter().map(|&r| usize::from(r < 1.0)).collect();
    let a = C::from_polar(1.0, start);
    let fans = vec![
        Fan { base_radius: r_out, approach: vec![Curve::Line { from: a, to: a * r_out }] },
        Fan { base_radius: 1.0 / r_out, approach: vec![Curve::Line { from: a, to: a / r_out }] },
    ];
    Patch { name, kind, coord, anchor, owner, center: C::new(0.0, 0.0), start, angles: offset_angles(start, cols), radii, fan_of_row, fans, holes }
}

/// Sizes and radii of the grids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Columns of a sphere grid; every other grid size derives from it.
    pub columns: usize,
    /// Fourier modes of Φ used for the Iwasawa splitting.
    pub modes: usize,
    /// Radius of the plumbing annuli in node coordinates.
    pub node_radius: f64,
    /// Largest radius of the end collars.
    pub ray_radius: f64,
    /// Smallest collar radius as a fraction of its largest.
    pub collar_depth: f64,
    /// Angular margin kept from the poles 0 and ∞ of each sphere.
    pub pole_margin: f64,
    /// Samples on each diagnostic ring.
    pub ring_points: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { columns: 48, modes: 24, node_radius: EPS_PRIME, ray_radius: 0.2, collar_depth: 1e-3, pole_margin: 0.03, ring_points: 128 }
    }
}

/// Frames at one λ: the charts and the anchor values.
pub struct AtLambda {
    pub charts: Vec<PointForm>,
    pub one: Vec<Mat2>,
    pub node: Vec<Mat2>,
    pub sphere: Vec<Mat2>,
}

/// The potential on the whole surface, glued (t > 0) or noded (t = 0).
pub enum Source<'a> {
    Glued(GluedForm<'a>),
    Noded(TimeZero<'a>),
}

impl Source<'_> {
    pub fn chart_index(&self, c: Coord) -> usize {
        match (self, c) {
            (Source::Glued(g), c) => g.index(c),
            (Source::Noded(_), Coord::Vertex(j)) => j,
            (Source::Noded(_), c) => panic!("no chart {c:?} on the noded surface"),
        }
    }

    pub fn at(&self, lambda: C, mo: &MonodromyOptions) -> Result<AtLambda> {
        match self {
            Source::Noded(z) => {
                let nv = z.layout.n_vertices();
                Ok(AtLambda { charts: (0..nv).map(|j| z.vertex_form(j, lambda)).collect(), one: vec![eye(); nv], node: vec![], sphere: vec![] })
            }
            Source::Glued(g) => glued_at(g, lambda, mo),
        }
    }
}

fn glued_at(g: &GluedForm, lambda: C, mo: &MonodromyOptions) -> Result<AtLambda> {
    let lay = g.layout;
    let coords: Vec<Coord> = (0..g.n_coords()).map(|i| g.coord(i)).collect();
    let charts = g.charts(&coords, lambda);
    let frames = frames_at(g, lambda, mo)?;
    let big_gamma = combine(lay, &frames, &frames).big_gamma;
    // Φ(1_j) along the tree from vertex 0.
    let nv = lay.n_vertices();
    let mut one: Vec<Option<Mat2>> = vec![None; nv];
    one[0] = Some(eye());
    let mut changed = true;
    while changed {
        changed = false;
        for e in 0..lay.n_spheres() {
            let (j, k) = (lay.dedges[2 * e].from, lay.dedges[2 * e + 1].from);
            match (one[j], one[k]) {
                (Some(a), None) => {
                    one[k] = Some(a * big_gamma[e]);
                    changed = true;
                }
                (None, Some(b)) => {
                    one[j] = Some(b * inv(&big_gamma[e]));
                    changed = true;
                }
                _ => {}
            }
        }
    }
    let one: Vec<Mat2> = one.into_iter().map(|m| m.expect("tree is connected")).collect();
    let mut st = Stepper::default();
    let to = &mo.taylor;
    let c = 2.0 * (EPS_PRIME / 2.0).atan();
    let mut node = Vec::with_capacity(lay.dedges.len());
    for d in 0..lay.dedges.len() {
        let j = lay.dedges[d].from;
        let arc = Curve::unit_arc(alpha_angle(lay, DirSlot::DEdge(d)), node_angle(g, d) + c);
        let y = one[j] * frames.alpha[slot_index(lay, DirSlot::DEdge(d))] * st.transport(&charts[g.index(Coord::Vertex(j))], lambda, &arc, to)?;
        node.push(y);
    }
    let mut sphere = Vec::with_capacity(lay.n_spheres());
    for e in 0..lay.n_spheres() {
        let pieces = beta_pieces(g, e)?;
        let mut y = node[2 * e];
        let (cd, line) = pieces[1];
        y *= st.transport(&charts[g.index(cd)], lambda, &line, to)?;
        y *= st.transport(&charts[g.index(Coord::Sphere(e))], lambda, &Curve::unit_arc(c, PI / 2.0), to)?;
        sphere.push(y);
    }
    Ok(AtLambda { charts, one, node, sphere })
}

/// Evaluates every patch: frames on the λ grid, then Iwasawa per point.
pub fn evaluate(src: &Source, patches: &[Patch], mo: &MonodromyOptions, modes: usize, rho: f64) -> Result<Vec<Vec<Option<FramePoint>>>> {
    let grid = CircleGrid::for_modes(modes);
    let per_lambda: Vec<Vec<Vec<Option<Mat2>>>> = (0..grid.m)
        .into_par_iter()
        .map(|k| -> Result<Vec<Vec<Option<Mat2>>>> {
            let lambda = grid.point(k);
            let at = src.at(lambda, mo)?;
            let mut st = Stepper::default();
            patches
                .iter()
                .map(|p| {
                    let y0 = match p.anchor {
                        Anchor::One(j) => at.one[j],
                        Anchor::Node(d) => at.node[d],
                        Anchor::EdgeSphere(e) => at.sphere[e],
                    };
                    p.march(&at.charts[src.chart_index(p.coord)], lambda, y0, &mo.taylor, &mut st)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    patches
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            (0..p.rows() * p.cols())
                .into_par_iter()
                .map(|q| -> Result<Option<FramePoint>> {
                    if per_lambda[0][pi][q].is_none() {
                        return Ok(None);
                    }
                    let samples: Vec<Mat2> = (0..grid.m).map(|k| per_lambda[k][pi][q].expect("holes do not depend on λ")).collect();
                    frame_point(&samples, &grid, modes, rho).map(Some)
                })
                .collect()
        })
        .collect()
}

/// Largest distance on the λ circle between the edge sphere pole q(λ) and q(0).
pub fn q_spread(x: &UnknownVector, e: usize, grid: &CircleGrid) -> f64 {
    let nu = &x.spheres[e].nu;
    grid.points().iter().map(|&l| (poly(nu, l) - nu[0]).norm()).fold(0.0, f64::max)
}

/// Largest distance on the λ circle between a ray pole p(λ) and p(0).
pub fn pole_spread(x: &UnknownVector, r: usize, grid: &CircleGrid) -> f64 {
    let th = &x.rays[r].theta;
    let p0 = C::from_polar(1.0, th[0]);
    grid.points().iter().map(|&l| ((C::new(0.0, 1.0) * poly(th, l)).exp() - p0).norm()).fold(0.0, f64::max)
}
