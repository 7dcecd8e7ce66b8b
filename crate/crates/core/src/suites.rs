//! Seeded self-check suites shared by the CLI `verify` command and the tests.
//!
//! Each suite draws its cases from a ChaCha generator seeded with the user
//! seed and the suite name, so a (suite, seed, cases) triple always produces
//! the same report. The closed-form fixtures are computed from the formulas
//! themselves rather than from stored numbers.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Edge, Ray, Vertex, WeightedGraph};
use crate::linalg::{c, det, diag, eye, max_abs, mat, Mat2};
use crate::loopgroup::{exp_loop, gauge_action, iwasawa, IwasawaOptions, LoopMatrix, Potential};
use crate::monodromy::paths::{conj_d, MonodromyOptions};
use crate::monodromy::{newton_solve, residuals, Curve, SolveOptions, Solution, Stepper, TaylorOptions};
use crate::potentials::{b_s, f_s_frame, inv_stereo, phi_s, Coord, GluedForm, Layout, ModelKind, ModelPotential, PointForm, Pointwise, SphericalGauge, TimeZero, UnknownVector};
use crate::surface::frame::{psi, sym};
use crate::surface::patches::{evaluate, sphere_patch, Anchor, PartKind, Patch, Source};
use crate::wiener::{CircleGrid, LoopScalar};
use crate::C;

pub const DEFAULT_CASES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Wiener,
    Loop,
    Potential,
    Monodromy,
    Surface,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Wiener, Suite::Loop, Suite::Potential, Suite::Monodromy, Suite::Surface];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Wiener => "wiener",
            Suite::Loop => "loop",
            Suite::Potential => "potential",
            Suite::Monodromy => "monodromy",
            Suite::Surface => "surface",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// One property or fixture: the worst error over its cases against a fixed tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
    /// First library error raised by a case, if any.
    pub error: Option<String>,
}

impl Check {
    pub fn new(name: &str, tolerance: f64) -> Self {
        Check { name: name.to_string(), cases: 0, failures: 0, worst: 0.0, tolerance, error: None }
    }

    pub fn record(&mut self, err: Result<f64>) {
        self.cases += 1;
        match err {
            Ok(e) => {
                if e.is_nan() || e > self.tolerance {
                    self.failures += 1;
                }
                self.worst = if e.is_nan() { f64::NAN } else { self.worst.max(e) };
            }
            Err(e) => {
                self.failures += 1;
                self.error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

fn rng_for(suite: Suite, seed: u64) -> ChaCha8Rng {
    // FNV-1a of the suite name keeps the suites' streams apart for one seed.
    let h = suite.name().bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = rng_for(suite, seed);
    let checks = match suite {
        Suite::Wiener => wiener_suite(&mut rng, cases),
        Suite::Loop => loop_suite(&mut rng, cases),
        Suite::Potential => potential_suite(&mut rng, cases),
        Suite::Monodromy => monodromy_suite(&mut rng, cases)?,
        Suite::Surface => surface_suite(&mut rng, cases)?,
    };
    Ok(SuiteReport { suite, seed, checks, seconds: start.elapsed().as_secs_f64() })
}

// ---------------------------------------------------------------- sampling

fn rand_c(rng: &mut ChaCha8Rng, s: f64) -> C {
    c(rng.gen_range(-s..s), rng.gen_range(-s..s))
}

fn rand_unit(rng: &mut ChaCha8Rng) -> C {
    C::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
}

fn rand_loop(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> LoopScalar {
    // Coefficients decaying like ρ^{-|i|} keep every mode visible in the weighted norm.
    let coeffs = (0..2 * n + 1).map(|k| rand_c(rng, 1.0) * rho.powi(-((k as i64 - n as i64).abs() as i32))).collect();
    LoopScalar::from_coeffs(coeffs, rho)
}

fn rand_mat(rng: &mut ChaCha8Rng, s: f64) -> Mat2 {
    mat(rand_c(rng, s), rand_c(rng, s), rand_c(rng, s), rand_c(rng, s))
}

fn traceless(m: Mat2) -> Mat2 {
    let h = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    m - diag(h, h)
}

// ------------------------------------------------------------------ wiener

fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(1.0)
}

fn loop_dist(a: &LoopScalar, b: &LoopScalar) -> Result<f64> {
    Ok(a.sub(b)?.norm())
}

fn wiener_suite(rng: &mut ChaCha8Rng, cases: usize) -> Vec<Check> {
    let mut inv = Check::new("star and bar are norm-preserving involutions", 1e-14);
    let mut submult = Check::new("norm is submultiplicative", 1e-12);
    let mut triangle = Check::new("norm satisfies the triangle inequality", 1e-12);
    let mut star_mul = Check::new("star is multiplicative", 1e-12);
    let mut eval_mul = Check::new("product evaluates pointwise", 1e-12);
    let mut split = Check::new("projections recombine with additive norm", 1e-13);
    let mut samples = Check::new("samples round-trip to coefficients", 1e-12);
    for _ in 0..cases {
        let rho = rng.gen_range(1.05..2.0);
        let (nf, ng) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let f = rand_loop(rng, nf, rho);
        let g = rand_loop(rng, ng, rho);
        let lambda = C::from_polar(rng.gen_range(1.0 / rho..rho), rng.gen_range(0.0..2.0 * PI));
        inv.record((|| {
            let a = loop_dist(&f.star().star(), &f)?.max(loop_dist(&f.bar().bar(), &f)?);
            let b = (f.star().norm() - f.norm()).abs().max((f.bar().norm() - f.norm()).abs());
            Ok(rel(a.max(b), f.norm()))
        })());
        let full = f.mul_truncated(&g, nf + ng).map(|(p, _)| p);
        submult.record(full.as_ref().map(|p| rel((p.norm() - f.norm() * g.norm()).max(0.0), f.norm() * g.norm())).map_err(clone_err));
        triangle.record(f.add(&g).map(|s| rel((s.norm() - f.norm() - g.norm()).max(0.0), f.norm() + g.norm())));
        star_mul.record((|| {
            let p = full.as_ref().map_err(clone_err)?;
            let q = f.star().mul_truncated(&g.star(), nf + ng)?.0;
            Ok(rel(loop_dist(&p.star(), &q)?, p.norm()))
        })());
        eval_mul.record(full.as_ref().map(|p| (p.eval(lambda) - f.eval(lambda) * g.eval(lambda)).norm() / (1.0 + p.eval(lambda).norm())).map_err(clone_err));
        split.record((|| {
            let (m, z, p) = f.project();
            let back = m.add(&LoopScalar::constant(z, nf, rho))?.add(&p)?;
            Ok(rel(loop_dist(&back, &f)?.max((m.norm() + z.norm() + p.norm() - f.norm()).abs()), f.norm()))
        })());
        samples.record((|| {
            let grid = CircleGrid::for_modes(nf);
            let (back, alias) = LoopScalar::from_samples(&f.to_samples(&grid)?, &grid, nf, rho)?;
            Ok(rel(loop_dist(&back, &f)?.max(alias), f.norm()))
        })());
    }
    vec![inv, submult, triangle, star_mul, eval_mul, split, samples]
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidParameter(e.to_string())
}

// -------------------------------------------------------------------- loop

/// Largest entry-wise coefficient difference of two loops.
pub fn coefficient_error(a: &LoopMatrix, b: &LoopMatrix) -> f64 {
    let n = a.n().max(b.n()) as i64;
    let get = |m: &LoopMatrix, i: i64| if i.unsigned_abs() as usize <= m.n() { m.coeff(i) } else { Mat2::zeros() };
    (-n..=n).map(|i| max_abs(&(get(a, i) - get(b, i)))).fold(0.0, f64::max)
}

fn sampled(f: impl Fn(C) -> Result<Mat2>, n: usize, rho: f64) -> Result<LoopMatrix> {
    let grid = CircleGrid::for_modes(n);
    let s: Vec<Mat2> = grid.points().into_iter().map(f).collect::<Result<_>>()?;
    Ok(LoopMatrix::from_samples(&s, &grid, n, rho)?.0)
}

/// Iwasawa splitting of Φ^S(z) against the closed-form factors: worst coefficient error of F and B.
pub fn sphere_iwasawa_error(z: C, n: usize, rho: f64) -> Result<f64> {
    let phi = sampled(|l| phi_s(z, l), n, rho)?;
    let (f, b, _) = iwasawa(&phi, IwasawaOptions::default())?;
    let fe = sampled(|l| f_s_frame(z, l), n, rho)?;
    let be = sampled(|l| b_s(z, l), n, rho)?;
    Ok(coefficient_error(&f, &fe).max(coefficient_error(&b, &be)))
}

/// |Ψ(Sym F^S(z)) − π⁻¹(z)| with the λ-derivative taken from the exact three-mode loop.
pub fn sphere_sym_error(z: C) -> Result<f64> {
    let f = sampled(|l| f_s_frame(z, l), 2, 1.2)?;
    let (f1, df1) = f.eval_and_deriv(c(1.0, 0.0))?;
    let (x, y) = (psi(sym(&f1, &df1)), inv_stereo(z));
    Ok((0..3).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max))
}

/// z with |z| in [0.1, 10] spread in log-radius.
fn rand_z(rng: &mut ChaCha8Rng) -> C {
    C::from_polar(10f64.powf(rng.gen_range(-1.0..1.0)), rng.gen_range(-PI..PI))
}

fn loop_suite(rng: &mut ChaCha8Rng, cases: usize) -> Vec<Check> {
    let n = 16;
    let rho = 1.2;
    let grid = CircleGrid::for_modes(n);
    let mut unit = Check::new("Iwasawa unitary factor is unitary", 1e-9);
    let mut plus = Check::new("Iwasawa positive factor lies in the plus group", 1e-9);
    let mut product = Check::new("Iwasawa factors multiply back", 1e-8);
    let mut fixture = Check::new("sphere frame splits into the closed-form factors", 1e-8);
    let mut sym_check = Check::new("Sym of the sphere frame is the inverse stereographic projection", 1e-10);
    for _ in 0..cases {
        let (a, b0, cm) = (traceless(rand_mat(rng, 0.3)), traceless(rand_mat(rng, 0.3)), traceless(rand_mat(rng, 0.3)));
        let split = (|| -> Result<(LoopMatrix, LoopMatrix, LoopMatrix)> {
            let m = LoopMatrix::from_coeff_fn(n, rho, |i| match i {
                -1 => cm,
                0 => b0,
                1 => a,
                _ => Mat2::zeros(),
            });
            let phi = exp_loop(&m)?;
            let (f, b, _) = iwasawa(&phi, IwasawaOptions::default())?;
            Ok((phi, f, b))
        })();
        match split {
            Ok((phi, f, b)) => {
                unit.record(f.unitarity_defect(&grid));
                plus.record(Ok(b.plus_defect()));
                product.record(f.mul(&b).and_then(|p| p.sub(&phi)).map(|d| d.norm() / phi.norm()));
            }
            Err(e) => {
                let msg = e.to_string();
                for ch in [&mut unit, &mut plus, &mut product] {
                    ch.record(Err(Error::InvalidParameter(msg.clone())));
                }
            }
        }
        let z = rand_z(rng);
        fixture.record(sphere_iwasawa_error(z, n, rho));
        sym_check.record(sphere_sym_error(z));
    }
    vec![unit, plus, product, fixture, sym_check]
}

// --------------------------------------------------------------- potential

/// |ξ^S·G^S − [[0, λ⁻¹],[0, 0]]/(2(z+1)²)| at one point.
pub fn gauge_identity_error(z: C, lambda: C) -> f64 {
    let pot = ModelPotential(ModelKind::Spherical);
    let pw = Pointwise(&pot);
    let gauged = gauge_action(&pw, &SphericalGauge);
    let want = mat(c(0.0, 0.0), lambda.inv(), c(0.0, 0.0), c(0.0, 0.0)) / ((z + 1.0) * (z + 1.0) * 2.0);
    max_abs(&(gauged.matrix(z, lambda) - want))
}

/// |R_j − conj(F_j)/2| at the central value, worst over vertices.
pub fn residue_force_error(graph: &WeightedGraph) -> Result<f64> {
    let lay = Layout::new(graph)?;
    let x = UnknownVector::central(&lay, 4);
    let r = TimeZero::new(&lay, &x)?.regularity();
    Ok(graph.forces().iter().zip(&r.r_vertex).map(|(f, r)| (r - f.conj() * 0.5).norm()).fold(0.0, f64::max))
}

/// A single vertex with 1 to 5 rays at random angles and weights; almost never balanced.
pub fn random_ray_vertex(rng: &mut impl Rng) -> WeightedGraph {
    let k = rng.gen_range(1..=5);
    let rays = (0..k).map(|i| Ray { vertex: 1, angle: 2.0 * PI * (i as f64 + rng.gen_range(0.1..0.9)) / k as f64, weight: rng.gen_range(0.2..2.0) }).collect();
    WeightedGraph::new(vec![Vertex { id: 1, pos: c(0.0, 0.0) }], vec![], rays).expect("rays at distinct angles")
}

/// Length-2 chain with one outward ray at each end, all weights 1.
pub fn unit_chain() -> WeightedGraph {
    WeightedGraph::new(
        vec![Vertex { id: 1, pos: c(0.0, 0.0) }, Vertex { id: 2, pos: c(0.0, 2.0) }],
        vec![Edge { a: 1, b: 2, weight: 1.0 }],
        vec![Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }, Ray { vertex: 2, angle: PI / 2.0, weight: 1.0 }],
    )
    .expect("chain is valid")
}

/// Two opposite unit rays at one vertex.
pub fn two_rays() -> WeightedGraph {
    WeightedGraph::new(
        vec![Vertex { id: 1, pos: c(0.0, 0.0) }],
        vec![],
        vec![Ray { vertex: 1, angle: PI / 2.0, weight: 1.0 }, Ray { vertex: 1, angle: -PI / 2.0, weight: 1.0 }],
    )
    .expect("two rays are valid")
}

/// Central unknowns plus a random real perturbation of every Newton coordinate.
fn perturbed(rng: &mut ChaCha8Rng, lay: &Layout, n: usize, s: f64) -> UnknownVector {
    let x = UnknownVector::central(lay, n);
    let v: Vec<f64> = x.to_newton(lay).iter().map(|a| a + rng.gen_range(-s..s)).collect();
    x.with_newton(lay, &v)
}

/// Defect of the σ-symmetry −conj(ξ(1/z̄, λ̄))/z² = D ξ(z, λ) D⁻¹, relative to |ξ(z, λ)|.
fn sigma_form_defect(f: &PointForm, fb: &PointForm, z: C, l: C) -> f64 {
    let lhs = fb.matrix(z.conj().inv(), l.conj()).map(|v| -v.conj()) / (z * z);
    let m = f.matrix(z, l);
    let rhs = mat(m[(0, 0)], -m[(0, 1)], -m[(1, 0)], m[(1, 1)]);
    max_abs(&(lhs - rhs)) / (1.0 + max_abs(&m))
}

fn potential_suite(rng: &mut ChaCha8Rng, cases: usize) -> Vec<Check> {
    let mut gauge = Check::new("spherical gauge removes the poles of the sphere potential", 1e-12);
    let mut sigma = Check::new("glued potential is sigma-symmetric", 1e-12);
    let mut bridge = Check::new("vertex residue is half the conjugate force", 1e-9);
    let lay = Layout::new(&unit_chain()).expect("chain layout");
    for _ in 0..cases {
        let z = loop {
            let z = rand_z(rng);
            if (z + 1.0).norm() > 0.1 && z.arg().abs() < PI - 1e-3 {
                break z;
            }
        };
        let l = rand_unit(rng);
        // relative to the size of the target, which blows up at z = −1
        gauge.record(Ok(gauge_identity_error(z, l) * (z + 1.0).norm_sqr().min(1.0)));
        let x = perturbed(rng, &lay, 3, 0.02);
        let t = rng.gen_range(0.005..0.05);
        let j = rng.gen_range(0..2);
        sigma.record((|| {
            let g = GluedForm::new(&lay, &x, t)?;
            let f = g.chart(Coord::Vertex(j), l);
            let fb = g.chart(Coord::Vertex(j), l.conj());
            Ok(sigma_form_defect(&f, &fb, z, l))
        })());
        bridge.record(residue_force_error(&random_ray_vertex(rng)));
    }
    vec![gauge, sigma, bridge]
}

// --------------------------------------------------------------- monodromy

fn poles(f: &PointForm) -> Vec<C> {
    f.simple.iter().chain(&f.double).map(|(a, _)| *a).collect()
}

/// Smallest distance to a pole over 64 points of each curve.
fn clearance(f: &PointForm, curves: &[Curve]) -> f64 {
    curves.iter().flat_map(|cv| (0..=64).map(move |i| cv.point(i as f64 / 64.0))).map(|z| f.nearest_pole(z)).fold(f64::INFINITY, f64::min)
}

fn inside_triangle(p: C, a: C, b: C, q: C) -> bool {
    let side = |u: C, v: C| ((v - u).conj() * (p - u)).im;
    let (s1, s2, s3) = (side(a, b), side(b, q), side(q, a));
    (s1 > 0.0 && s2 > 0.0 && s3 > 0.0) || (s1 < 0.0 && s2 < 0.0 && s3 < 0.0)
}

fn transport_chain(st: &mut Stepper, f: &PointForm, l: C, curves: &[Curve]) -> Result<Mat2> {
    let to = TaylorOptions::default();
    let mut y = eye();
    for cv in curves {
        y *= st.transport(f, l, cv, &to)?;
    }
    Ok(y)
}

fn rel_dist(a: &Mat2, b: &Mat2) -> f64 {
    max_abs(&(a - b)) / (1.0 + max_abs(b))
}

/// z in the annulus 0.3 ≤ |z| ≤ 3.
fn rand_annulus(rng: &mut ChaCha8Rng) -> C {
    C::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(-PI..PI))
}

/// Radial segments and centred arcs, a family closed under z ↦ 1/z̄.
fn rand_polar_path(rng: &mut ChaCha8Rng) -> Vec<Curve> {
    let mut r = rng.gen_range(0.3..3.0);
    let mut a = rng.gen_range(-PI..PI);
    let mut out = Vec::new();
    for k in 0..3 {
        if k % 2 == 0 {
            let b = a + rng.gen_range(-2.5..2.5);
            out.push(Curve::Arc { center: c(0.0, 0.0), radius: r, from: a, to: b });
            a = b;
        } else {
            let r1 = rng.gen_range(0.3..3.0);
            out.push(Curve::Line { from: C::from_polar(r, a), to: C::from_polar(r1, a) });
            r = r1;
        }
    }
    out
}

fn mirror(cv: &Curve) -> Curve {
    match *cv {
        Curve::Line { from, to } => Curve::Line { from: from.conj().inv(), to: to.conj().inv() },
        Curve::Arc { center, radius, from, to } => Curve::Arc { center, radius: 1.0 / radius, from, to },
    }
}

/// Central-value checks on the unit chain at t = 0.
#[derive(Clone, Debug, Serialize)]
pub struct CentralCheck {
    /// Largest |E1|, |E2|, |E3| component.
    pub e_max: f64,
    /// M̌ of the directed edges against 2πi τ(λ − 1)²/(4λ)·diag(1, −1).
    pub edge_m: f64,
    /// M̌ of the rays against 2πi τ/4·diag(1, −1).
    pub ray_m: f64,
    /// P_jk against ±diag(λ, λ⁻¹).
    pub p: f64,
    /// |L_jk| = |1 − ℓ/2|.
    pub length: f64,
}

pub fn central_values(graph: &WeightedGraph, n: usize) -> Result<CentralCheck> {
    let lay = Layout::new(graph)?;
    let x = UnknownVector::central(&lay, n);
    let mo = MonodromyOptions::for_modes(n);
    let r = residuals(&lay, &x, 0.0, &mo)?;
    let two_pi_i = c(0.0, 2.0 * PI);
    let d = diag(c(1.0, 0.0), c(-1.0, 0.0));
    let mut out = CentralCheck { e_max: r.e1_max().max(r.e2_max()).max(r.e3_max()), edge_m: 0.0, ray_m: 0.0, p: 0.0, length: r.l.iter().fold(0.0, |m, v| m.max(v.abs())) };
    for (k, l) in mo.grid.points().into_iter().enumerate() {
        for (s, de) in lay.dedges.iter().enumerate() {
            let want = d * (two_pi_i * de.tau * (l - 1.0) * (l - 1.0) / (l * 4.0));
            out.edge_m = out.edge_m.max(max_abs(&(r.m_check[s][k] - want)));
        }
        for (i, ray) in lay.rays.iter().enumerate() {
            let want = d * (two_pi_i * ray.tau * 0.25);
            out.ray_m = out.ray_m.max(max_abs(&(r.m_check[lay.dedges.len() + i][k] - want)));
        }
        for pe in &r.p {
            let w = diag(l, l.inv());
            out.p = out.p.max(max_abs(&(pe[k] - w)).min(max_abs(&(pe[k] + w))));
        }
    }
    Ok(out)
}

fn monodromy_suite(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<Check>> {
    let mut split = Check::new("principal solution is multiplicative under splitting", 1e-10);
    let mut reverse = Check::new("reversed path gives the inverse", 1e-10);
    let mut unimodular = Check::new("principal solution has determinant 1", 1e-10);
    let mut homotopy = Check::new("pole-free triangle has trivial monodromy", 1e-9);
    let mut sigma = Check::new("sigma-mirrored path transports to the D-conjugate", 1e-9);
    let mut central = Check::new("central-value monodromies match the closed forms", 1e-9);
    let lay = Layout::new(&unit_chain())?;
    let mut st = Stepper::default();
    for _ in 0..cases {
        let x = perturbed(rng, &lay, 3, 0.02);
        let t = rng.gen_range(0.005..0.05);
        let g = GluedForm::new(&lay, &x, t)?;
        let chart = Coord::Vertex(rng.gen_range(0..2));
        let l = rand_unit(rng);
        let f = g.chart(chart, l);
        // segment and split
        let seg = loop {
            let s = Curve::Line { from: rand_annulus(rng), to: rand_annulus(rng) };
            if clearance(&f, &[s]) > 0.05 {
                break s;
            }
        };
        let s = rng.gen_range(0.1..0.9);
        let (a, b) = (seg.start(), seg.end());
        let m = a + (b - a) * s;
        let pieces = [Curve::Line { from: a, to: m }, Curve::Line { from: m, to: b }];
        let whole = transport_chain(&mut st, &f, l, &[seg]);
        split.record((|| {
            let w = whole.as_ref().map_err(clone_err)?;
            Ok(rel_dist(&transport_chain(&mut st, &f, l, &pieces)?, w))
        })());
        reverse.record((|| {
            let w = whole.as_ref().map_err(clone_err)?;
            let back = transport_chain(&mut st, &f, l, &[seg.reversed()])?;
            Ok(max_abs(&(w * back - eye())) / (1.0 + max_abs(w) * max_abs(&back)))
        })());
        unimodular.record(whole.as_ref().map(|w| (det(w) - 1.0).norm() / (1.0 + max_abs(w).powi(2))).map_err(clone_err));
        // triangle with no pole inside
        let tri = loop {
            let (p0, p1, p2) = (rand_annulus(rng), rand_annulus(rng), rand_annulus(rng));
            let edges = [Curve::Line { from: p0, to: p1 }, Curve::Line { from: p1, to: p2 }, Curve::Line { from: p2, to: p0 }];
            if clearance(&f, &edges) > 0.05 && !poles(&f).iter().any(|&q| inside_triangle(q, p0, p1, p2)) {
                break edges;
            }
        };
        homotopy.record(transport_chain(&mut st, &f, l, &tri).map(|y| max_abs(&(y - eye()))));
        // σ-transport: P(σγ)(λ) = conj_d(P(γ)(λ̄))
        let fb = g.chart(chart, l.conj());
        let path = loop {
            let p = rand_polar_path(rng);
            let m: Vec<Curve> = p.iter().map(mirror).collect();
            if clearance(&f, &p) > 0.05 && clearance(&f, &m) > 0.05 && clearance(&fb, &p) > 0.05 {
                break p;
            }
        };
        let mirrored: Vec<Curve> = path.iter().map(mirror).collect();
        sigma.record((|| {
            let lhs = transport_chain(&mut st, &f, l, &mirrored)?;
            let rhs = conj_d(&transport_chain(&mut st, &fb, l.conj(), &path)?);
            Ok(rel_dist(&lhs, &rhs))
        })());
    }
    central.record(central_values(&unit_chain(), 6).map(|cv| cv.e_max.max(cv.edge_m).max(cv.ray_m).max(cv.p).max(cv.length)));
    Ok(vec![split, reverse, unimodular, homotopy, sigma, central])
}

// ----------------------------------------------------------------- surface

/// The two-ray state at t = 0.05 that the surface suite samples.
pub fn two_ray_state() -> Result<Solution> {
    newton_solve(&two_rays(), 0.05, &SolveOptions::default())
}

/// Positions at random z and at 1/z̄ on a solved state, each pair marched along
/// mirrored paths, and the worst distance from the reflection in the horizontal plane.
pub fn mirror_pairs(sol: &Solution, rng: &mut impl Rng, pairs: usize, modes: usize) -> Result<Vec<f64>> {
    if sol.t <= 0.0 {
        return Err(Error::InvalidParameter("mirror pairs need a glued state".into()));
    }
    let lay = sol.layout()?;
    let mo = sol.monodromy_options();
    let g = GluedForm::new(&lay, &sol.unknowns, sol.t)?;
    let f0 = g.chart(Coord::Vertex(0), c(1.0, 0.0));
    let patches: Vec<Patch> = (0..pairs)
        .map(|i| loop {
            let r: f64 = rng.gen_range(0.3..0.85);
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            let z = C::from_polar(r, a);
            if f0.nearest_pole(z) < 0.1 || f0.nearest_pole(z.conj().inv()) < 0.1 {
                continue;
            }
            let mut p = sphere_patch(format!("pair_{i}"), PartKind::Sphere, Coord::Vertex(0), Anchor::One(0), 0, 0.0, 2, 1, 0.1, mo.r_out, vec![]);
            p.angles = vec![a];
            p.radii = vec![r, 1.0 / r];
            p.fan_of_row = vec![1, 0];
            break p;
        })
        .collect();
    let values = evaluate(&Source::Glued(g), &patches, &mo, modes, sol.rho)?;
    values
        .iter()
        .map(|v| match (v[0], v[1]) {
            (Some(a), Some(b)) => {
                let (x, y) = (a.position, b.position);
                Ok(((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2) + (y[2] + x[2]).powi(2)).sqrt())
            }
            _ => Err(Error::InvalidParameter("mirror pair fell in a hole".into())),
        })
        .collect()
}

fn surface_suite(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<Check>> {
    let mut check = Check::new("mesh points at z and 1/z-bar are mirror images", 1e-8);
    match two_ray_state().and_then(|sol| mirror_pairs(&sol, rng, cases, 24)) {
        Ok(d) => d.into_iter().for_each(|e| check.record(Ok(e))),
        Err(e) => check.record(Err(e)),
    }
    Ok(vec![check])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("all"), None);
    }

    #[test]
    fn check_counts_nan_and_errors_as_failures() {
        let mut ch = Check::new("x", 1.0);
        ch.record(Ok(0.5));
        assert!(ch.passed());
        ch.record(Ok(f64::NAN));
        ch.record(Err(Error::Singular(0.0)));
        assert_eq!((ch.cases, ch.failures), (3, 2));
        assert!(ch.error.is_some());
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_suite(Suite::Wiener, 7, 20).unwrap();
        let b = run_suite(Suite::Wiener, 7, 20).unwrap();
        let w = |r: &SuiteReport| r.checks.iter().map(|c| c.worst).collect::<Vec<_>>();
        assert_eq!(w(&a), w(&b));
        assert!(a.passed());
    }

    #[test]
    fn closed_form_fixtures_hold() {
        assert!(sphere_iwasawa_error(c(0.4, -1.3), 16, 1.2).unwrap() < 1e-8);
        assert!(sphere_sym_error(c(-2.0, 0.5)).unwrap() < 1e-12);
        assert!(gauge_identity_error(c(0.3, 0.2), c(0.6, 0.8)) < 1e-13);
    }
}
