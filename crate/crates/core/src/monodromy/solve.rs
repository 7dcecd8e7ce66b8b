//! Newton solve of the residual system at fixed t. The graph moves with the
//! solution: its target forces and edge lengths are extra unknowns, matched
//! by the vertex residues R_j and the length defects L_jk.
//!
//! The iteration starts from a finite-difference Jacobian taken at
//! t = 0 (closed forms, cheap) and refines it with Broyden updates. A fresh
//! finite-difference Jacobian at the working t is taken whenever the
//! contraction of a step is poor or the line search fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DeformTargets, WeightedGraph, AXIS_CLEARANCE, BALANCE_TOL};
use crate::monodromy::paths::MonodromyOptions;
use crate::monodromy::residuals::{residuals, Residuals};
use crate::potentials::{Layout, UnknownVector};
use crate::C;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub modes: usize,
    pub rho: f64,
    /// Sup norm of the residual vector at convergence.
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// Ratio of successive residual norms above which the Jacobian is recomputed.
    pub refresh_rate: f64,
    /// Largest acceptable weighted tail of the residual loops.
    pub tail_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            modes: 12,
            rho: 1.2,
            tol: 1e-9,
            max_iter: 30,
            fd_step: 1e-7,
            refresh_rate: 0.4,
            tail_threshold: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn monodromy(&self) -> MonodromyOptions {
        MonodromyOptions { rho: self.rho, ..MonodromyOptions::for_modes(self.modes) }
    }
}

/// One accepted Newton step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub step: f64,
    pub damping: f64,
    pub fresh_jacobian: bool,
    /// Wall time since the start; kept out of the state file so reruns are byte-identical.
    #[serde(skip)]
    pub seconds: f64,
}

/// Everything needed to rebuild the surface, plus the convergence history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    /// Graph as given.
    pub input_graph: WeightedGraph,
    /// Rotation applied before solving (radians).
    pub rotation: f64,
    /// Graph at which the system was solved (rotated and deformed).
    pub graph: WeightedGraph,
    pub t: f64,
    pub rho: f64,
    pub modes: usize,
    pub unknowns: UnknownVector,
    pub residual: f64,
    pub vertex_residue: f64,
    pub length_defect: f64,
    pub tail: f64,
    pub asymmetry: f64,
    pub distance_from_central: f64,
    pub newton_iterations: usize,
    pub jacobian_evaluations: usize,
    pub log: Vec<IterationRecord>,
}

impl Solution {
    pub fn layout(&self) -> Result<Layout> {
        Layout::new(&self.graph)
    }

    pub fn monodromy_options(&self) -> MonodromyOptions {
        MonodromyOptions { rho: self.rho, ..MonodromyOptions::for_modes(self.modes) }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Forward-difference Jacobian of the residual vector in Newton coordinates
/// of a fixed graph.
pub fn fd_jacobian(layout: &Layout, x: &UnknownVector, t: f64, h: f64, mo: &MonodromyOptions) -> Result<DMatrix<f64>> {
    let v = x.to_newton(layout);
    let f = |w: &[f64]| -> Result<Vec<f64>> { Ok(residuals(layout, &x.with_newton(layout, w), t, mo)?.newton(layout)) };
    fd_columns(&f, &v, h, true)
}

/// Forward differences of f at v; with `relative` the step of coordinate i is h(1 + |v_i|).
pub(crate) fn fd_columns(f: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync), v: &[f64], h: f64, relative: bool) -> Result<DMatrix<f64>> {
    let r0 = f(v)?;
    let cols: Vec<Vec<f64>> = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let mut w = v.to_vec();
            let hi = if relative { h * (1.0 + v[i].abs()) } else { h };
            w[i] += hi;
            let r = f(&w)?;
            Ok(r.iter().zip(&r0).map(|(a, b)| (a - b) / hi).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(r0.len(), v.len(), |i, j| cols[j][i]))
}

/// The coupled system. Unknowns: offsets of the Newton coordinates from the
/// central value of the current graph, then the target forces (x, y pairs)
/// and edge lengths that define the graph by deformation of the base graph.
/// Residuals: E1..E4, then (Re, Im) R_j, then L_jk.
struct System<'a> {
    base: &'a WeightedGraph,
    n_x: usize,
    modes: usize,
}

struct Point {
    graph: WeightedGraph,
    layout: Layout,
    x: UnknownVector,
}

impl System<'_> {
    fn point(&self, z: &[f64]) -> Result<Point> {
        let (w, y) = z.split_at(self.n_x);
        let nv = self.base.vertices.len();
        let forces = (0..nv).map(|j| C::new(y[2 * j], y[2 * j + 1])).collect();
        let lengths = y[2 * nv..].to_vec();
        let graph = if y == self.base.outputs().as_slice() { self.base.clone() } else { self.base.deform(&DeformTargets { forces, lengths })? };
        let layout = Layout::new(&graph)?;
        let c = UnknownVector::central(&layout, self.modes);
        let v: Vec<f64> = c.to_newton(&layout).iter().zip(w).map(|(a, b)| a + b).collect();
        let x = c.with_newton(&layout, &v);
        Ok(Point { graph, layout, x })
    }

    fn residual_vector(p: &Point, res: &Residuals) -> Vec<f64> {
        let mut out = res.newton(&p.layout);
        for r in &res.r_vertex {
            out.push(r.re);
            out.push(r.im);
        }
        out.extend(&res.l);
        out
    }

    fn eval(&self, z: &[f64], t: f64, mo: &MonodromyOptions) -> Result<Vec<f64>> {
        let p = self.point(z)?;
        let res = residuals(&p.layout, &p.x, t, mo)?;
        Ok(Self::residual_vector(&p, &res))
    }

    fn jacobian(&self, z: &[f64], t: f64, h: f64, mo: &MonodromyOptions) -> Result<DMatrix<f64>> {
        fd_columns(&|w: &[f64]| self.eval(w, t, mo), z, h, true)
    }
}

/// Checks the preconditions of a solve and returns the graph rotated away
/// from the branch direction of the vertex charts, with the rotation angle.
pub fn prepare(graph: &WeightedGraph, t: f64) -> Result<(WeightedGraph, f64)> {
    if graph.max_force() > BALANCE_TOL {
        return Err(Error::NotBalanced(graph.max_force()));
    }
    let nd = graph.nondegeneracy();
    if !nd.surjective {
        return Err(Error::Degenerate { rank: nd.rank, needed: nd.rows });
    }
    if t > 0.0 && !graph.is_tree() {
        return Err(Error::NotATree);
    }
    if graph.axis_clearance() < AXIS_CLEARANCE {
        let a = graph.normalization_angle();
        Ok((graph.rotated(a), a))
    } else {
        Ok((graph.clone(), 0.0))
    }
}

/// Solves the monodromy and regularity problems at parameter t, moving the
/// graph so that the vertex residues and length defects vanish as well.
pub fn newton_solve(graph: &WeightedGraph, t: f64, opts: &SolveOptions) -> Result<Solution> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t}")));
    }
    let (base, rotation) = prepare(graph, t)?;
    let mo = opts.monodromy();
    let start = Instant::now();
    let layout0 = Layout::new(&base)?;
    let n_x = UnknownVector::central(&layout0, opts.modes).to_newton(&layout0).len();
    let sys = System { base: &base, n_x, modes: opts.modes };
    let mut z: Vec<f64> = vec![0.0; n_x];
    z.extend(base.outputs());
    let mut r = sys.eval(&z, t, &mo)?;
    let mut jac = sys.jacobian(&z, 0.0, opts.fd_step, &mo)?;
    let mut jac_evals = 1;
    let mut fresh = t == 0.0;
    let mut log = Vec::new();
    while sup(&r) > opts.tol {
        if log.len() >= opts.max_iter {
            return Err(Error::MaxIterations { iterations: log.len(), residual: sup(&r) });
        }
        let dz = jac.clone().lu().solve(&DVector::from_column_slice(&r)).ok_or(Error::Singular(0.0))?;
        let mut damping = 1.0;
        let mut accepted = None;
        while damping >= 1.0 / 64.0 {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a - damping * d).collect();
            if let Ok(rt) = sys.eval(&trial, t, &mo) {
                if l2(&rt) < (1.0 - 1e-4 * damping) * l2(&r) {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            damping /= 2.0;
        }
        let Some((z_new, r_new)) = accepted else {
            if fresh {
                return Err(Error::MaxIterations { iterations: log.len(), residual: sup(&r) });
            }
            jac = sys.jacobian(&z, t, opts.fd_step, &mo)?;
            jac_evals += 1;
            fresh = true;
            continue;
        };
        let rate = l2(&r_new) / l2(&r);
        let s = DVector::from_iterator(z.len(), z.iter().zip(&z_new).map(|(a, b)| b - a));
        let y = DVector::from_iterator(r.len(), r_new.iter().zip(&r).map(|(a, b)| a - b));
        log.push(IterationRecord {
            iteration: log.len() + 1,
            residual: sup(&r_new),
            step: s.amax(),
            damping,
            fresh_jacobian: fresh,
            seconds: start.elapsed().as_secs_f64(),
        });
        z = z_new;
        r = r_new;
        if sup(&r) <= opts.tol {
            break;
        }
        if rate > opts.refresh_rate {
            jac = sys.jacobian(&z, t, opts.fd_step, &mo)?;
            jac_evals += 1;
            fresh = true;
        } else {
            // Broyden rank-one correction
            let js = &jac * &s;
            let ss = s.dot(&s);
            if ss > 0.0 {
                jac += (y - js) * s.transpose() / ss;
            }
            fresh = false;
        }
    }
    let p = sys.point(&z)?;
    let res = residuals(&p.layout, &p.x, t, &mo)?;
    if res.tail > opts.tail_threshold {
        return Err(Error::TruncationInsufficient { tail: res.tail, threshold: opts.tail_threshold });
    }
    let central = UnknownVector::central(&p.layout, opts.modes);
    Ok(Solution {
        input_graph: graph.clone(),
        rotation,
        graph: p.graph,
        t,
        rho: opts.rho,
        modes: opts.modes,
        distance_from_central: p.x.distance(&central, &p.layout),
        unknowns: p.x,
        residual: res.max_abs(),
        vertex_residue: res.r_vertex.iter().map(|r| r.norm()).fold(0.0, f64::max),
        length_defect: sup(&res.l),
        tail: res.tail,
        asymmetry: res.asymmetry,
        newton_iterations: log.len(),
        jacobian_evaluations: jac_evals,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Ray, Vertex};
    use std::f64::consts::PI;

    fn two_rays() -> WeightedGraph {
        WeightedGraph::new(
            vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }],
            vec![],
            vec![Ray { vertex: 1, angle: PI / 2.0, weight: 1.0 }, Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }],
        )
        .unwrap()
    }

    #[test]
    fn time_zero_solution_is_central() {
        let opts = SolveOptions { modes: 4, ..Default::default() };
        let s = newton_solve(&two_rays(), 0.0, &opts).unwrap();
        assert!(s.residual < 1e-12);
        assert!(s.distance_from_central < 1e-12);
        assert_eq!(s.newton_iterations, 0);
    }

    #[test]
    fn unbalanced_graph_is_rejected() {
        let g = WeightedGraph::new(vec![Vertex { id: 1, pos: C::new(0.0, 0.0) }], vec![], vec![Ray { vertex: 1, angle: 0.3, weight: 1.0 }]).unwrap();
        assert!(matches!(newton_solve(&g, 0.01, &SolveOptions::default()), Err(Error::NotBalanced(_))));
    }

    #[test]
    fn two_rays_converge_at_small_t() {
        let opts = SolveOptions { modes: 4, ..Default::default() };
        let s = newton_solve(&two_rays(), 0.02, &opts).unwrap();
        assert!(s.residual <= 1e-9, "{}", s.residual);
        assert!(s.distance_from_central > 0.0 && s.distance_from_central < 0.2);
    }
}
