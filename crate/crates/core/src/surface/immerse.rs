//! The immersion of a solved state: patches per chart, evaluation, and the
//! rigid motion back to the frame of the input graph.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::monodromy::ode::Curve;
use crate::monodromy::paths::{unwrap_near, MonodromyOptions};
use crate::monodromy::Solution;
use crate::potentials::unknowns::arg_pos;
use crate::potentials::{Coord, GluedForm, Layout, TimeZero, UnknownVector};
use crate::surface::frame::FramePoint;
use crate::surface::mesh::{add, cross, dot, sub, Group, Mesh, V3};
use crate::surface::patches::{evaluate, log_radii, offset_angles, pole_spread, q_spread, sphere_patch, Anchor, Fan, Hole, MeshOptions, PartKind, Patch, Source};
use crate::wiener::CircleGrid;
use crate::C;

/// Grid bookkeeping of one meshed patch.
#[derive(Clone, Debug)]
pub struct PatchPoints {
    pub name: String,
    pub kind: PartKind,
    pub owner: usize,
    pub rows: usize,
    pub cols: usize,
    pub radii: Vec<f64>,
    /// Mesh vertex of grid point i·cols + k.
    pub index: Vec<Option<usize>>,
    pub max_aliasing: f64,
    pub max_unitarity: f64,
}

/// What a diagnostic ring goes around.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingSite {
    End(usize),
    Neck(usize),
}

/// Evenly spaced samples around a closed curve, counterclockwise in its chart.
#[derive(Clone, Debug)]
pub struct Ring {
    pub site: RingSite,
    pub points: Vec<FramePoint>,
}

#[derive(Clone, Debug)]
pub struct Immersion {
    pub t: f64,
    pub mesh: Mesh,
    pub patches: Vec<PatchPoints>,
    pub rings: Vec<Ring>,
    /// Vertex positions of the solved graph, moved like the surface.
    pub centers: Vec<V3>,
    /// Smallest collar radius per ray.
    pub collar_floor: Vec<f64>,
    pub max_aliasing: f64,
    pub max_unitarity: f64,
}

struct Motion {
    cos: f64,
    sin: f64,
    shift: V3,
}

impl Motion {
    fn rotate(&self, v: V3) -> V3 {
        [self.cos * v[0] - self.sin * v[1], self.sin * v[0] + self.cos * v[1], v[2]]
    }

    fn point(&self, v: V3) -> V3 {
        self.rotate(add(v, self.shift))
    }
}

fn v3(z: C) -> V3 {
    [z.re, z.im, 0.0]
}

/// Gap between consecutive direction arguments at a vertex (2π with fewer than two).
fn min_gap(layout: &Layout, j: usize) -> f64 {
    let mut a: Vec<f64> = layout.order[j].iter().map(|s| arg_pos(layout.u(*s))).collect();
    if a.len() < 2 {
        return 2.0 * PI;
    }
    a.sort_by(f64::total_cmp);
    let mut g = a[0] + 2.0 * PI - a[a.len() - 1];
    for w in a.windows(2) {
        g = g.min(w[1] - w[0]);
    }
    g
}

/// Patches of the glued surface plus one diagnostic ring per end and per neck.
fn glued_patches(layout: &Layout, x: &UnknownVector, g: &GluedForm, opts: &MeshOptions, mo: &MonodromyOptions) -> (Vec<Patch>, Vec<RingSite>, Vec<f64>) {
    let cols = opts.columns;
    let small_cols = (2 * cols / 3).max(8);
    let rows = cols / 2;
    let r_out = mo.r_out;
    let ids: Vec<u32> = layout.graph.vertices.iter().map(|v| v.id).collect();
    let mut patches = Vec::new();
    let mut sites = Vec::new();
    let mut floors = Vec::new();
    let spread_grid = CircleGrid::for_modes(opts.modes);
    let ray_radius = |j: usize| opts.ray_radius.min(0.4 * min_gap(layout, j));
    for j in 0..layout.n_vertices() {
        let mut holes = Vec::new();
        for (d, de) in layout.dedges.iter().enumerate() {
            if de.from == j {
                holes.push(Hole::Node { p: g.p(d), radius: opts.node_radius });
            }
        }
        for (r, ri) in layout.rays.iter().enumerate() {
            if ri.vertex == j {
                holes.push(Hole::Disk { center: C::from_polar(1.0, x.rays[r].theta[0]), radius: ray_radius(j) });
            }
        }
        patches.push(sphere_patch(format!("sphere_{}", ids[j]), PartKind::Sphere, Coord::Vertex(j), Anchor::One(j), j, 0.0, rows, cols, opts.pole_margin, r_out, holes));
    }
    // End collars and their outer rings.
    let mut count = vec![0usize; layout.n_vertices()];
    let mut collars = Vec::new();
    for (r, ri) in layout.rays.iter().enumerate() {
        let j = ri.vertex;
        let eps = ray_radius(j);
        let th = unwrap_near(x.rays[r].theta[0], arg_pos(ri.u));
        let p0 = C::from_polar(1.0, th);
        let floor = (eps * opts.collar_depth).max(3.0 * pole_spread(x, r, &spread_grid));
        floors.push(floor);
        let approach = vec![
            Curve::Line { from: C::new(1.0, 0.0), to: C::new(r_out, 0.0) },
            Curve::Arc { center: C::new(0.0, 0.0), radius: r_out, from: 0.0, to: th },
            Curve::Line { from: C::from_polar(r_out, th), to: C::from_polar(1.0 + eps, th) },
        ];
        let make = |name: String, kind: PartKind, radii: Vec<f64>, m: usize| Patch {
            name,
            kind,
            coord: Coord::Vertex(j),
            anchor: Anchor::One(j),
            owner: r,
            center: p0,
            start: th,
            angles: offset_angles(th, m),
            fan_of_row: vec![0; radii.len()],
            radii,
            fans: vec![Fan { base_radius: eps, approach: approach.clone() }],
            holes: vec![],
        };
        collars.push(make(format!("end_{}_{}", ids[j], count[j]), PartKind::End, log_radii(eps, floor, rows), small_cols));
        count[j] += 1;
        patches.push(make(format!("ring_end_{r}"), PartKind::Ring, vec![eps], opts.ring_points));
        sites.push(RingSite::End(r));
    }
    for d in 0..layout.dedges.len() {
        let td = g.t_d(d);
        let eps = opts.node_radius;
        let make = |name: String, kind: PartKind, radii: Vec<f64>, m: usize| Patch {
            name,
            kind,
            coord: Coord::Node(d),
            anchor: Anchor::Node(d),
            owner: d,
            center: C::new(0.0, 0.0),
            start: 0.0,
            angles: offset_angles(0.0, m),
            fan_of_row: vec![0; radii.len()],
            radii,
            fans: vec![Fan { base_radius: eps, approach: vec![] }],
            holes: vec![],
        };
        let de = layout.dedges[d];
        collars.push(make(format!("neck_{}_{}", ids[de.from], ids[de.to]), PartKind::Neck, log_radii(eps, td / eps, (rows / 2).max(4)), small_cols));
        patches.push(make(format!("ring_neck_{d}"), PartKind::Ring, vec![td.sqrt()], opts.ring_points));
        sites.push(RingSite::Neck(d));
    }
    for e in 0..layout.n_spheres() {
        let mut holes: Vec<Hole> = [2 * e, 2 * e + 1].iter().map(|&d| Hole::Node { p: C::new(layout.dedges[d].node_prime(), 0.0), radius: opts.node_radius }).collect();
        // q moves with λ; the loop of Φ is singular on the cloud it sweeps.
        let nu = x.spheres[e].nu[0];
        holes.push(Hole::Pair { center: C::new(0.0, nu), radius: 3.0 * q_spread(x, e, &spread_grid) + 1e-9 });
        let (a, b) = layout.graph.edge_ends(e);
        patches.push(sphere_patch(format!("catenoid_{}_{}", ids[a], ids[b]), PartKind::Catenoid, Coord::Sphere(e), Anchor::EdgeSphere(e), e, PI / 2.0, rows, cols, opts.pole_margin, r_out, holes));
    }
    patches.extend(collars);
    (patches, sites, floors)
}

/// Triangulates a rows × cyclic-columns grid, orienting each face along its vertex normals.
fn triangulate(p: &PatchPoints, normals: &[V3], positions: &[V3]) -> Vec<[usize; 3]> {
    let mut faces = Vec::new();
    for i in 0..p.rows.saturating_sub(1) {
        for k in 0..p.cols {
            let k1 = (k + 1) % p.cols;
            let at = |a: usize, b: usize| p.index[a * p.cols + b];
            let quad = [at(i, k), at(i, k1), at(i + 1, k1), at(i + 1, k)];
            for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                if let [Some(a), Some(b), Some(c)] = tri {
                    let fnorm = cross(sub(positions[b], positions[a]), sub(positions[c], positions[a]));
                    let vn = add(add(normals[a], normals[b]), normals[c]);
                    faces.push(if dot(fnorm, vn) >= 0.0 { [a, b, c] } else { [a, c, b] });
                }
            }
        }
    }
    faces
}

fn assemble(patches: &[Patch], values: Vec<Vec<Option<FramePoint>>>, motion: &Motion, offsets: &[V3], sites: &[RingSite]) -> (Mesh, Vec<PatchPoints>, Vec<Ring>, f64, f64) {
    let mut mesh = Mesh::default();
    let mut points = Vec::new();
    let mut rings = Vec::new();
    let (mut alias, mut unit) = (0.0f64, 0.0f64);
    let mut site = sites.iter();
    for (p, vals) in patches.iter().zip(values) {
        let off = offsets[p.owner.min(offsets.len() - 1)];
        let place = |f: FramePoint| FramePoint { position: motion.point(add(f.position, if p.kind == PartKind::Sphere { off } else { [0.0; 3] })), normal: motion.rotate(f.normal), ..f };
        let (pa, pu) = vals.iter().flatten().fold((0.0f64, 0.0f64), |(a, u), f| (a.max(f.aliasing), u.max(f.unitarity)));
        alias = alias.max(pa);
        unit = unit.max(pu);
        if p.kind == PartKind::Ring {
            rings.push(Ring { site: *site.next().expect("one site per ring"), points: vals.into_iter().map(|f| place(f.expect("rings avoid holes"))).collect() });
            continue;
        }
        let index: Vec<Option<usize>> = vals
            .into_iter()
            .map(|v| {
                v.map(|f| {
                    let f = place(f);
                    mesh.positions.push(f.position);
                    mesh.normals.push(f.normal);
                    mesh.positions.len() - 1
                })
            })
            .collect();
        let pp = PatchPoints { name: p.name.clone(), kind: p.kind, owner: p.owner, rows: p.rows(), cols: p.cols(), radii: p.radii.clone(), index, max_aliasing: pa, max_unitarity: pu };
        let faces = triangulate(&pp, &mesh.normals, &mesh.positions);
        mesh.groups.push(Group { name: p.name.clone(), kind: p.kind, faces });
        points.push(pp);
    }
    (mesh, points, rings, alias, unit)
}

/// Immersion of a solved state; t = 0 gives the union of unit spheres.
pub fn immerse(sol: &Solution, opts: &MeshOptions) -> Result<Immersion> {
    if opts.columns < 8 || !opts.columns.is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!("mesh columns must be a multiple of 4 and at least 8, got {}", opts.columns)));
    }
    let layout = sol.layout()?;
    let mo = sol.monodromy_options();
    let v0 = v3(sol.graph.vertices[0].pos);
    let motion = Motion { cos: (-sol.rotation).cos(), sin: (-sol.rotation).sin(), shift: v0 };
    let centers: Vec<V3> = sol.graph.vertices.iter().map(|v| motion.rotate(v3(v.pos))).collect();
    if sol.t == 0.0 {
        return immerse_noded(&layout, &sol.unknowns, opts, &mo, sol.rho, &motion, centers);
    }
    let g = GluedForm::new(&layout, &sol.unknowns, sol.t)?;
    let (patches, sites, collar_floor) = glued_patches(&layout, &sol.unknowns, &g, opts, &mo);
    let values = evaluate(&Source::Glued(g), &patches, &mo, opts.modes, sol.rho)?;
    let (mesh, patches, rings, max_aliasing, max_unitarity) = assemble(&patches, values, &motion, &[[0.0; 3]], &sites);
    Ok(Immersion { t: sol.t, mesh, patches, rings, centers, collar_floor, max_aliasing, max_unitarity })
}

fn immerse_noded(layout: &Layout, x: &UnknownVector, opts: &MeshOptions, mo: &MonodromyOptions, rho: f64, motion: &Motion, centers: Vec<V3>) -> Result<Immersion> {
    let ids: Vec<u32> = layout.graph.vertices.iter().map(|v| v.id).collect();
    let rows = opts.columns / 2;
    let patches: Vec<Patch> = (0..layout.n_vertices())
        .map(|j| sphere_patch(format!("sphere_{}", ids[j]), PartKind::Sphere, Coord::Vertex(j), Anchor::One(j), j, 0.0, rows, opts.columns, opts.pole_margin, mo.r_out, vec![]))
        .collect();
    let z = TimeZero::new(layout, x)?;
    let values = evaluate(&Source::Noded(z), &patches, mo, opts.modes, rho)?;
    let p0 = layout.graph.vertices[0].pos;
    let offsets: Vec<V3> = layout.graph.vertices.iter().map(|v| v3(v.pos - p0)).collect();
    let (mesh, patches, rings, max_aliasing, max_unitarity) = assemble(&patches, values, motion, &offsets, &[]);
    Ok(Immersion { t: 0.0, mesh, patches, rings, centers, collar_floor: vec![], max_aliasing, max_unitarity })
}

/// The t = 0 surface of a graph: unit spheres at the vertices, no checks on balance.
pub fn immerse_central(graph: &WeightedGraph, opts: &MeshOptions) -> Result<Immersion> {
    let layout = Layout::new(graph)?;
    let modes = 4;
    let x = UnknownVector::central(&layout, modes);
    let mo = MonodromyOptions::for_modes(modes);
    let v0 = v3(graph.vertices[0].pos);
    let motion = Motion { cos: 1.0, sin: 0.0, shift: v0 };
    let centers = graph.vertices.iter().map(|v| v3(v.pos)).collect();
    immerse_noded(&layout, &x, opts, &mo, mo.rho, &motion, centers)
}
