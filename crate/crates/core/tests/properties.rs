//! Randomized invariants checked with proptest.

use std::f64::consts::PI;

use proptest::prelude::*;

use dpw_core::graph::{Edge, Ray, Vertex, WeightedGraph};
use dpw_core::linalg::{self, c, Mat2};
use dpw_core::loopgroup::{exp_loop, iwasawa, IwasawaOptions, LoopMatrix};
use dpw_core::potentials::{Mobius, Pt};
use dpw_core::wiener::{CircleGrid, LoopScalar};
use dpw_core::C;

const RHO: f64 = 1.2;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() }
}

fn complex(scale: f64) -> impl Strategy<Value = C> {
    (-scale..scale, -scale..scale).prop_map(|(a, b)| c(a, b))
}

/// Loop with 1..=6 modes and geometrically decaying coefficients.
fn loop_scalar() -> impl Strategy<Value = LoopScalar> {
    (1usize..=6).prop_flat_map(|n| {
        prop::collection::vec(complex(1.0), 2 * n + 1).prop_map(move |cs| {
            let cs = cs.into_iter().enumerate().map(|(k, z)| z * 0.5f64.powi((k as i64 - n as i64).abs() as i32)).collect();
            LoopScalar::from_coeffs(cs, RHO)
        })
    })
}

fn circle_point() -> impl Strategy<Value = C> {
    (0.0..2.0 * PI).prop_map(|th| C::from_polar(1.0, th))
}

fn annulus_point() -> impl Strategy<Value = C> {
    (1.0 / RHO + 1e-3..RHO - 1e-3, 0.0..2.0 * PI).prop_map(|(r, th)| C::from_polar(r, th))
}

fn close(a: C, b: C, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

/// Balanced star: rays with random angles, the last ray cancelling the force.
fn balanced_star() -> impl Strategy<Value = WeightedGraph> {
    prop::collection::vec((0.0..2.0 * PI, 0.2..2.0f64), 2..5).prop_filter_map("cancelling ray too small", |rays| {
        let f: C = rays.iter().map(|&(a, w)| C::from_polar(w, a)).sum();
        if f.norm() < 0.2 {
            return None;
        }
        let mut rays: Vec<Ray> = rays.into_iter().map(|(angle, weight)| Ray { vertex: 1, angle, weight }).collect();
        rays.push(Ray { vertex: 1, angle: (-f).arg(), weight: f.norm() });
        WeightedGraph::new(vec![Vertex { id: 1, pos: c(0.0, 0.0) }], vec![], rays).ok()
    })
}

/// Two vertices joined by an edge, each with one or two rays of random weight.
fn two_vertex_graph() -> impl Strategy<Value = WeightedGraph> {
    (complex(3.0), 0.2..2.0f64, prop::collection::vec((0.0..2.0 * PI, 0.2..2.0f64, any::<bool>()), 2..5)).prop_filter_map("coincident vertices", |(p, w, rays)| {
        if p.norm() < 0.5 {
            return None;
        }
        let rays = rays.into_iter().map(|(angle, weight, first)| Ray { vertex: if first { 1 } else { 2 }, angle, weight }).collect();
        WeightedGraph::new(vec![Vertex { id: 1, pos: c(0.0, 0.0) }, Vertex { id: 2, pos: p }], vec![Edge { a: 1, b: 2, weight: w }], rays).ok()
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn product_is_associative_and_commutative(f in loop_scalar(), g in loop_scalar(), h in loop_scalar()) {
        let n = f.n() + g.n() + h.n();
        let fg = f.mul_truncated(&g, n).unwrap().0;
        let gf = g.mul_truncated(&f, n).unwrap().0;
        prop_assert!(fg.sub(&gf).unwrap().norm() <= 1e-13 * (1.0 + fg.norm()));
        let left = fg.mul_truncated(&h, n).unwrap().0;
        let right = f.mul_truncated(&g.mul_truncated(&h, n).unwrap().0, n).unwrap().0;
        prop_assert!(left.sub(&right).unwrap().norm() <= 1e-12 * (1.0 + left.norm()));
    }

    #[test]
    fn norm_is_submultiplicative(f in loop_scalar(), g in loop_scalar()) {
        let (fg, tail) = f.mul_truncated(&g, f.n() + g.n()).unwrap();
        prop_assert_eq!(tail, 0.0);
        prop_assert!(fg.norm() <= f.norm() * g.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn star_is_conjugation_on_the_circle(f in loop_scalar(), l in circle_point()) {
        prop_assert!(close(f.star().eval(l), f.eval(l).conj(), 1e-13));
        prop_assert!(close(f.bar().eval(l.conj()), f.eval(l).conj(), 1e-13));
        prop_assert_eq!(f.star().star(), f.clone());
    }

    #[test]
    fn evaluation_is_a_ring_map(f in loop_scalar(), g in loop_scalar(), l in annulus_point()) {
        let fg = f.mul_truncated(&g, f.n() + g.n()).unwrap().0;
        prop_assert!(close(fg.eval(l), f.eval(l) * g.eval(l), 1e-12));
        prop_assert!(close(f.add(&g).unwrap().eval(l), f.eval(l) + g.eval(l), 1e-13));
    }

    #[test]
    fn projections_recombine(f in loop_scalar(), l in annulus_point()) {
        let (minus, zero, plus) = f.project();
        prop_assert!(close(minus.eval(l) + zero + plus.eval(l), f.eval(l), 1e-13));
        prop_assert!(minus.coeffs().iter().skip(f.n()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn samples_round_trip(f in loop_scalar()) {
        let grid = CircleGrid::for_modes(f.n());
        let s = f.to_samples(&grid).unwrap();
        let (g, alias) = LoopScalar::from_samples(&s, &grid, f.n(), RHO).unwrap();
        prop_assert!(alias <= 1e-13);
        prop_assert!(g.sub(&f).unwrap().norm() <= 1e-13 * (1.0 + f.norm()));
    }

    #[test]
    fn mobius_compose_and_inverse(m in (complex(2.0), complex(2.0), complex(2.0), complex(2.0)), k in (complex(2.0), complex(2.0), complex(2.0), complex(2.0)), z in complex(3.0)) {
        let m = Mobius::new(m.0, m.1, m.2, m.3);
        let k = Mobius::new(k.0, k.1, k.2, k.3);
        prop_assume!((m.a * m.d - m.b * m.c).norm() > 0.1 && (k.a * k.d - k.b * k.c).norm() > 0.1);
        let kz = k.apply_c(z);
        prop_assume!(kz.norm() < 1e3 && (m.c * kz + m.d).norm() > 1e-2 && (k.c * z + k.d).norm() > 1e-2);
        prop_assert!(close(m.compose(&k).apply_c(z), m.apply_c(kz), 1e-9));
        prop_assert!(close(m.inverse().apply_c(m.apply_c(z)), z, 1e-8));
        // Chain rule for the derivative.
        prop_assert!(close(m.compose(&k).deriv(z), m.deriv(kz) * k.deriv(z), 1e-8));
        // The pole of m sits where m⁻¹ sends ∞, up to rounding.
        match m.apply(m.inverse().apply(Pt::Inf)) {
            Pt::Inf => {}
            Pt::Fin(w) => prop_assert!(w.norm() > 1e8, "finite image {w}"),
        }
    }

    #[test]
    fn rigid_motions_rotate_forces(g in two_vertex_graph(), theta in 0.0..2.0 * PI, d in complex(5.0)) {
        let w = C::from_polar(1.0, theta);
        let moved = g.rotated(theta).translated(d);
        for (a, b) in g.forces().iter().zip(moved.forces()) {
            prop_assert!(close(a * w, b, 1e-12));
        }
        prop_assert!((g.edge_length(0) - moved.edge_length(0)).abs() <= 1e-12 * g.edge_length(0));
        prop_assert_eq!(g.nondegeneracy().rank, moved.nondegeneracy().rank);
        prop_assert_eq!(g.is_tree(), moved.is_tree());
    }

    #[test]
    fn json_round_trip_preserves_the_graph(g in two_vertex_graph()) {
        let back = WeightedGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back.vertices.len(), g.vertices.len());
        for (a, b) in g.forces().iter().zip(back.forces()) {
            prop_assert!(close(*a, b, 1e-12));
        }
        prop_assert_eq!(back.edges, g.edges);
    }

    #[test]
    fn balanced_stars_are_balanced_and_normalize_away_from_the_axis(g in balanced_star()) {
        prop_assert!(g.is_balanced(1e-12));
        let th = g.normalization_angle();
        prop_assert!(g.rotated(th).axis_clearance() >= g.axis_clearance() - 1e-12);
    }

    #[test]
    fn iwasawa_factors_exponentials(a in (complex(0.3), complex(0.3), complex(0.3)), b in (complex(0.3), complex(0.3), complex(0.3)), d in (complex(0.3), complex(0.3), complex(0.3))) {
        // exp of a trace-free Laurent polynomial of degree one; 16 modes hold it to rounding.
        let n = 16;
        let tf = |(p, q, r): (C, C, C)| linalg::mat(p, q, r, -p);
        let (a, b, d) = (tf(a), tf(b), tf(d));
        let m = LoopMatrix::from_coeff_fn(n, RHO, |i| match i {
            -1 => d,
            0 => b,
            1 => a,
            _ => Mat2::zeros(),
        });
        let phi = exp_loop(&m).unwrap();
        let (f, b, _) = iwasawa(&phi, IwasawaOptions::default()).unwrap();
        prop_assert!(f.unitarity_defect(&CircleGrid::for_modes(n)).unwrap() <= 1e-9);
        prop_assert!(b.plus_defect() <= 1e-9);
        let err = f.mul(&b).unwrap().sub(&phi).unwrap().norm() / phi.norm();
        prop_assert!(err <= 1e-8, "|FB − Φ| = {err:.3e}");
    }
}
