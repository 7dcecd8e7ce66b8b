//! Checks on an immersion: closing conditions, end and neck weights, symmetry,
//! sphere shape and discrete mean curvature.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{eye, max_abs, Mat2};
use crate::loopgroup::Dpw;
use crate::monodromy::paths::{monodromies_at_real, monodromies_on_grid, Monodromies};
use crate::monodromy::Solution;
use crate::potentials::unknowns::poly;
use crate::potentials::{Coord, GluedForm, PointForm};
use crate::surface::immerse::{Immersion, Ring, RingSite};
use crate::surface::mesh::{add, cross, norm, scale, sub, V3};
use crate::surface::patches::PartKind;
use crate::C;

/// Closing conditions of the solved state, measured directly on the monodromies.
#[derive(Clone, Debug, Serialize)]
pub struct MonodromyCheck {
    /// Worst ‖MᴴM − I‖ over the λ grid and every generator.
    pub unitarity: f64,
    /// Worst distance of a generator from ±I at λ = 1.
    pub at_one: f64,
    pub generators: usize,
}

fn all_generators(m: &Monodromies) -> impl Iterator<Item = &Mat2> {
    m.delta.iter().chain(&m.gamma).chain(&m.big_gamma)
}

pub fn monodromy_check(sol: &Solution) -> Result<MonodromyCheck> {
    let layout = sol.layout()?;
    let g = GluedForm::new(&layout, &sol.unknowns, sol.t)?;
    let mo = sol.monodromy_options();
    let grid = monodromies_on_grid(&g, &mo)?;
    let unitarity = grid.iter().flat_map(all_generators).map(|m| max_abs(&(m.adjoint() * m - eye()))).fold(0.0, f64::max);
    let one = monodromies_at_real(&g, 1.0, &mo)?;
    let at_one = all_generators(&one).map(|m| max_abs(&(m - eye())).min(max_abs(&(m + eye())))).fold(0.0, f64::max);
    Ok(MonodromyCheck { unitarity, at_one, generators: all_generators(&one).count() })
}

/// The form at z with every pole closer than 1e-12 left out.
fn eval_away(form: &PointForm, z: C) -> Dpw {
    let keep = |a: &C| (z - a).norm() > 1e-12;
    let pruned = PointForm {
        simple: form.simple.iter().filter(|(a, _)| keep(a)).copied().collect(),
        double: form.double.iter().filter(|(a, _)| keep(a)).copied().collect(),
        constant: form.constant,
    };
    pruned.eval(z)
}

/// 8πt·κ(λ)â(λ) with κ = p·β(p)/dz at the ray pole p = p(λ), for real λ; the
/// product is independent of λ.
pub fn end_weight_parameter(g: &GluedForm, r: usize, lambda: f64) -> f64 {
    let l = C::new(lambda, 0.0);
    let ray = &g.x.rays[r];
    let p = (C::new(0.0, 1.0) * poly(&ray.theta, l)).exp();
    let form = g.chart(Coord::Vertex(g.layout.rays[r].vertex), l);
    let kappa = p * eval_away(&form, p).beta;
    (8.0 * PI * g.t * kappa * poly(&ray.ahat, l)).re
}

/// Flux ∮ (N + f) × df of a closed curve; for unit mean curvature it only
/// depends on the homology class, and its length is the weight of an end or neck.
pub fn flux(points: &[V3], normals: &[V3]) -> V3 {
    let m = points.len();
    let h = 2.0 * PI / m as f64;
    let mut acc = [0.0; 3];
    for k in 0..m {
        let at = |o: isize| points[((k as isize + o).rem_euclid(m as isize)) as usize];
        // fourth-order central difference in the ring angle
        let d = scale(add(sub(at(-2), at(2)), scale(sub(at(1), at(-1)), 8.0)), 1.0 / (12.0 * h));
        acc = add(acc, scale(cross(add(normals[k], points[k]), d), h));
    }
    acc
}

fn ring_flux(ring: &Ring) -> V3 {
    let p: Vec<V3> = ring.points.iter().map(|f| f.position).collect();
    let n: Vec<V3> = ring.points.iter().map(|f| f.normal).collect();
    flux(&p, &n)
}

/// Mean distance of points from their centroid.
fn ring_radius(points: &[V3]) -> f64 {
    let c = scale(points.iter().fold([0.0; 3], |a, p| add(a, *p)), 1.0 / points.len() as f64);
    points.iter().map(|p| norm(sub(*p, c))).sum::<f64>() / points.len() as f64
}

/// Smallest row radius of a collar or annulus, over rows with every column present.
fn waist(imm: &Immersion, kind: PartKind, owner: usize) -> Option<f64> {
    let p = imm.patches.iter().find(|p| p.kind == kind && p.owner == owner)?;
    (0..p.rows)
        .filter_map(|i| {
            let pts: Option<Vec<V3>> = (0..p.cols).map(|k| p.index[i * p.cols + k].map(|v| imm.mesh.positions[v])).collect();
            pts.map(|v| ring_radius(&v))
        })
        .min_by(f64::total_cmp)
}

#[derive(Clone, Debug, Serialize)]
pub struct EndCheck {
    pub ray: usize,
    /// 2πtτ with the weight of the input graph.
    pub expected: f64,
    /// 8πtκâ at λ = 1.
    pub parameter: f64,
    /// The same at λ = −1; equal to `parameter` when the end is Delaunay to first order.
    pub parameter_minus: f64,
    /// Length of the flux through the outer collar ring.
    pub flux: f64,
    /// Cosine between the flux and the ray direction (sign depends on orientation).
    pub alignment: f64,
    /// Smallest collar cross-section radius.
    pub neck_radius: Option<f64>,
    pub collar_floor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeckCheck {
    pub dedge: usize,
    /// 2πtτ with the input weight of the edge.
    pub expected: f64,
    pub flux: f64,
    pub alignment: f64,
    /// Smallest cross-section radius of the plumbing annulus.
    pub waist: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub kind: PartKind,
    pub vertices: usize,
    pub faces: usize,
    pub max_aliasing: f64,
    pub max_unitarity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceReport {
    pub t: f64,
    pub vertices: usize,
    pub faces: usize,
    pub groups: Vec<GroupSummary>,
    pub max_aliasing: f64,
    pub max_unitarity: f64,
    /// max ||f − c_j| − 1| over the sphere groups.
    pub sphere_defect: f64,
    /// max |f(σz) − R f(z)| over mirror pairs, R the reflection in the horizontal plane.
    pub symmetry_defect: f64,
    /// Median of |H − 1| over interior mesh vertices.
    pub mean_curvature_error: f64,
    pub ends: Vec<EndCheck>,
    pub necks: Vec<NeckCheck>,
    pub monodromy: Option<MonodromyCheck>,
}

fn alignment(f: V3, u: C) -> f64 {
    let n = norm(f);
    if n == 0.0 {
        return 0.0;
    }
    (f[0] * u.re + f[1] * u.im) / n
}

pub fn sphere_defect(imm: &Immersion) -> f64 {
    let mut worst: f64 = 0.0;
    for p in imm.patches.iter().filter(|p| p.kind == PartKind::Sphere) {
        let c = imm.centers[p.owner];
        for v in p.index.iter().flatten() {
            worst = worst.max((norm(sub(imm.mesh.positions[*v], c)) - 1.0).abs());
        }
    }
    worst
}

/// Grid rows i and rows − 1 − i are mirror images under σ(z) = 1/z̄ on every sphere grid.
pub fn symmetry_defect(imm: &Immersion) -> f64 {
    let mut worst: f64 = 0.0;
    for p in imm.patches.iter().filter(|p| matches!(p.kind, PartKind::Sphere | PartKind::Catenoid)) {
        for i in 0..p.rows {
            for k in 0..p.cols {
                if let (Some(a), Some(b)) = (p.index[i * p.cols + k], p.index[(p.rows - 1 - i) * p.cols + k]) {
                    let (x, y) = (imm.mesh.positions[a], imm.mesh.positions[b]);
                    worst = worst.max(norm(sub(y, [x[0], x[1], -x[2]])));
                }
            }
        }
    }
    worst
}

pub fn mean_curvature_error(imm: &Immersion) -> f64 {
    let mut e: Vec<f64> = imm.mesh.mean_curvature().into_iter().flatten().map(|h| (h - 1.0).abs()).collect();
    if e.is_empty() {
        return f64::NAN;
    }
    e.sort_by(f64::total_cmp);
    e[e.len() / 2]
}

/// Every diagnostic; the monodromy check is skipped at t = 0.
pub fn diagnose(sol: &Solution, imm: &Immersion) -> Result<SurfaceReport> {
    let layout = sol.layout()?;
    let mut ends = Vec::new();
    let mut necks = Vec::new();
    let mut monodromy = None;
    if sol.t > 0.0 {
        let g = GluedForm::new(&layout, &sol.unknowns, sol.t)?;
        let rot = C::from_polar(1.0, -sol.rotation);
        for ring in &imm.rings {
            let f = ring_flux(ring);
            match ring.site {
                RingSite::End(r) => {
                    let ri = layout.rays[r];
                    ends.push(EndCheck {
                        ray: r,
                        expected: 2.0 * PI * sol.t * sol.input_graph.rays[r].weight,
                        parameter: end_weight_parameter(&g, r, 1.0),
                        parameter_minus: end_weight_parameter(&g, r, -1.0),
                        flux: norm(f),
                        alignment: alignment(f, ri.u * rot),
                        neck_radius: waist(imm, PartKind::End, r),
                        collar_floor: imm.collar_floor[r],
                    });
                }
                RingSite::Neck(d) => {
                    let de = layout.dedges[d];
                    necks.push(NeckCheck { dedge: d, expected: 2.0 * PI * sol.t * sol.input_graph.edges[de.edge].weight, flux: norm(f), alignment: alignment(f, de.u * rot), waist: waist(imm, PartKind::Neck, d) });
                }
            }
        }
        monodromy = Some(monodromy_check(sol)?);
    }
    let groups = imm
        .mesh
        .groups
        .iter()
        .zip(&imm.patches)
        .map(|(g, p)| GroupSummary { name: g.name.clone(), kind: g.kind, vertices: p.index.iter().flatten().count(), faces: g.faces.len(), max_aliasing: p.max_aliasing, max_unitarity: p.max_unitarity })
        .collect();
    Ok(SurfaceReport {
        t: sol.t,
        vertices: imm.mesh.positions.len(),
        faces: imm.mesh.n_faces(),
        groups,
        max_aliasing: imm.max_aliasing,
        max_unitarity: imm.max_unitarity,
        sphere_defect: sphere_defect(imm),
        symmetry_defect: symmetry_defect(imm),
        mean_curvature_error: mean_curvature_error(imm),
        ends,
        necks,
        monodromy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_flux_is_its_weight() {
        // unit mean curvature cylinder of radius 1/2 with inward normal;
        // the stencil's relative error on a circle is h⁴/30
        for m in [64, 128] {
            let (mut p, mut n) = (Vec::new(), Vec::new());
            for k in 0..m {
                let a = 2.0 * PI * k as f64 / m as f64;
                p.push([0.5 * a.cos(), 0.5 * a.sin(), 0.3]);
                n.push([-a.cos(), -a.sin(), 0.0]);
            }
            let f = flux(&p, &n);
            let h = 2.0 * PI / m as f64;
            assert!((norm(f) / (PI / 2.0) - 1.0).abs() < 1.1 * h.powi(4) / 30.0, "m = {m}: {f:?}");
            assert!(f[0].abs() + f[1].abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_circle_has_no_flux() {
        let m = 64;
        let (mut p, mut n) = (Vec::new(), Vec::new());
        for k in 0..m {
            let a = 2.0 * PI * k as f64 / m as f64;
            let x = [0.6 * a.cos(), 0.6 * a.sin(), 0.8];
            p.push(add(x, [2.0, 0.0, 0.0]));
            n.push(scale(x, -1.0));
        }
        assert!(norm(flux(&p, &n)) < 1e-12);
    }
}
