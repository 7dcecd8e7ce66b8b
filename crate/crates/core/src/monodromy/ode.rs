//! Principal solutions Y' = Y·A(z)dz along curves, for one λ at a time.
//!
//! Rational forms are integrated by Taylor stepping: around each point the
//! coefficient A is expanded exactly from its poles, and the step stays well
//! inside the disc of convergence. General potentials use an adaptive
//! Dormand–Prince pair.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{eye, max_abs, Mat2};
use crate::loopgroup::{Dpw, Potential};
use crate::potentials::PointForm;
use crate::C;

/// Line segment or circular arc, parametrized on [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Curve {
    Line { from: C, to: C },
    /// Centre, radius and start/end angles (the arc runs in the direction of increasing parameter).
    Arc { center: C, radius: f64, from: f64, to: f64 },
}

impl Curve {
    pub fn point(&self, s: f64) -> C {
        match *self {
            Curve::Line { from, to } => from + (to - from) * s,
            Curve::Arc { center, radius, from, to } => center + C::from_polar(radius, from + (to - from) * s),
        }
    }

    pub fn start(&self) -> C {
        self.point(0.0)
    }

    pub fn end(&self) -> C {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Curve::Line { from, to } => (to - from).norm(),
            Curve::Arc { radius, from, to, .. } => radius * (to - from).abs(),
        }
    }

    pub fn reversed(&self) -> Curve {
        match *self {
            Curve::Line { from, to } => Curve::Line { from: to, to: from },
            Curve::Arc { center, radius, from, to } => Curve::Arc { center, radius, from: to, to: from },
        }
    }

    /// Unit circle arc between two arguments.
    pub fn unit_arc(from: f64, to: f64) -> Curve {
        Curve::Arc { center: C::new(0.0, 0.0), radius: 1.0, from, to }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TaylorOptions {
    /// Step length over distance to the nearest pole.
    pub ratio: f64,
    pub max_step: f64,
    pub max_order: usize,
    /// Series truncated once two consecutive terms fall below tol·|sum|.
    pub tol: f64,
    /// Closest allowed approach to a pole.
    pub min_clearance: f64,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        TaylorOptions { ratio: 0.35, max_step: 0.5, max_order: 80, tol: 1e-16, min_clearance: 1e-13 }
    }
}

/// Reusable buffers for Taylor stepping.
#[derive(Default)]
pub struct Stepper {
    coeffs: Vec<Dpw>,
    a: Vec<Mat2>,
    y: Vec<Mat2>,
}

impl Stepper {
    /// Transfer matrix over the chord z → z + h, given that the series converges there.
    fn chord(&mut self, form: &PointForm, lambda: C, z: C, h: C, opts: &TaylorOptions) -> Mat2 {
        let k = opts.max_order;
        self.coeffs.resize(k, Dpw::zero());
        form.taylor(z, &mut self.coeffs);
        self.a.clear();
        // Ã_m = A_m h^{m+1}
        let mut hp = h;
        for c in &self.coeffs {
            self.a.push(c.matrix(lambda) * hp);
            hp *= h;
        }
        self.y.clear();
        self.y.push(eye());
        let mut sum = eye();
        let mut prev_small = false;
        for n in 0..k - 1 {
            let mut acc = Mat2::zeros();
            for (i, yk) in self.y.iter().enumerate() {
                acc += yk * self.a[n - i];
            }
            let next = acc / C::new((n + 1) as f64, 0.0);
            let size = max_abs(&next);
            sum += next;
            self.y.push(next);
            let small = size <= opts.tol * max_abs(&sum);
            if small && prev_small {
                break;
            }
            prev_small = small;
        }
        sum
    }

    /// Y(end) for Y' = Y·ξ along the curve with Y(start) = I.
    pub fn transport(&mut self, form: &PointForm, lambda: C, curve: &Curve, opts: &TaylorOptions) -> Result<Mat2> {
        let len = curve.length();
        let mut y = eye();
        let mut s = 0.0;
        let mut z = curve.start();
        while s < 1.0 {
            let d = form.nearest_pole(z);
            if d < opts.min_clearance {
                return Err(Error::PoleOnPath(format!("{z}")));
            }
            let step_len = (opts.ratio * d).min(opts.max_step);
            let ds = if len == 0.0 { 1.0 } else { (step_len / len).min(1.0 - s) };
            if ds < 1e-14 && s + ds < 1.0 {
                return Err(Error::StepUnderflow(format!("{z}")));
            }
            let s1 = if 1.0 - s - ds < 1e-15 { 1.0 } else { s + ds };
            let z1 = curve.point(s1);
            y *= self.chord(form, lambda, z, z1 - z, opts);
            s = s1;
            z = z1;
        }
        Ok(y)
    }
}

/// Principal solution of a rational form along a chain of curves.
pub fn transport(form: &PointForm, lambda: C, curves: &[Curve]) -> Result<Mat2> {
    let mut st = Stepper::default();
    let opts = TaylorOptions::default();
    let mut y = eye();
    for c in curves {
        y *= st.transport(form, lambda, c, &opts)?;
    }
    Ok(y)
}

/// Adaptive Dormand–Prince 5(4) integration of Y' = Y·A(z)z'(s) along a curve.
pub fn transport_potential(pot: &dyn Potential, lambda: C, curve: &Curve, tol: f64) -> Result<Mat2> {
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let nodes = [0.0, C2, C3, C4, C5, 1.0, 1.0];
    let rhs = |s: f64, y: &Mat2| -> Mat2 {
        let z = curve.point(s);
        let dz = match *curve {
            Curve::Line { from, to } => to - from,
            Curve::Arc { radius, from, to, .. } => {
                let th = from + (to - from) * s;
                C::new(0.0, 1.0) * C::from_polar(radius, th) * (to - from)
            }
        };
        y * pot.matrix(z, lambda) * dz
    };
    let mut y = eye();
    let mut s: f64 = 0.0;
    let mut h: f64 = 1e-2;
    let mut k = [Mat2::zeros(); 7];
    k[0] = rhs(0.0, &y);
    let mut steps = 0usize;
    while s < 1.0 {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::StepUnderflow(format!("{}", curve.point(s))));
        }
        h = h.min(1.0 - s);
        for i in 1..7 {
            let mut yi = y;
            for j in 0..i {
                if A[i - 1][j] != 0.0 {
                    yi += k[j] * C::new(h * A[i - 1][j], 0.0);
                }
            }
            k[i] = rhs(s + nodes[i] * h, &yi);
        }
        let mut y5 = y;
        for j in 0..6 {
            y5 += k[j] * C::new(h * A[5][j], 0.0);
        }
        let mut err = Mat2::zeros();
        for j in 0..7 {
            err += k[j] * C::new(h * E[j], 0.0);
        }
        let scale = tol * (1.0 + max_abs(&y5));
        let ratio = max_abs(&err) / scale;
        if ratio <= 1.0 {
            s += h;
            y = y5;
            k[0] = k[6];
        }
        let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < 1e-14 {
            return Err(Error::StepUnderflow(format!("{}", curve.point(s))));
        }
    }
    Ok(y)
}

/// Arc through angles, split where needed so every piece turns less than a half circle.
pub fn split_arc(center: C, radius: f64, from: f64, to: f64) -> Vec<Curve> {
    let n = (((to - from).abs() / PI).ceil() as usize).max(1);
    (0..n)
        .map(|i| {
            let a = from + (to - from) * i as f64 / n as f64;
            let b = from + (to - from) * (i + 1) as f64 / n as f64;
            Curve::Arc { center, radius, from: a, to: b }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, expm};
    use crate::potentials::model::phi_s;
    use crate::potentials::{ModelKind, ModelPotential, RationalLoopForm};

    fn const_form(m: Dpw) -> PointForm {
        PointForm { constant: m, ..Default::default() }
    }

    #[test]
    fn constant_form_on_segment() {
        let m = Dpw::new(c(0.3, 0.1), c(-0.2, 0.5), c(0.7, 0.0));
        let l = c(0.6, 0.8);
        let dz = c(0.9, -0.4);
        let y = transport(&const_form(m), l, &[Curve::Line { from: c(0.1, 0.2), to: c(0.1, 0.2) + dz }]).unwrap();
        assert!(max_abs(&(y - expm(&(m.matrix(l) * dz)))) < 1e-13);
    }

    #[test]
    fn full_turn_around_simple_pole() {
        let m = Dpw::new(c(0.2, 0.0), c(0.1, 0.3), c(-0.4, 0.1));
        let f = PointForm { simple: vec![(c(0.0, 0.0), m)], ..Default::default() };
        let l = c(0.0, 1.0);
        let y = transport(&f, l, &split_arc(c(0.0, 0.0), 1.0, 0.0, 2.0 * PI)).unwrap();
        let want = expm(&(m.matrix(l) * C::new(0.0, 2.0 * PI)));
        assert!(max_abs(&(y - want)) < 1e-12);
    }

    #[test]
    fn spherical_frame_along_arc() {
        let pot = ModelPotential(ModelKind::Spherical);
        for l in [c(1.0, 0.0), c(0.6, 0.8), C::from_polar(1.2, 0.4)] {
            let f = pot.at(l);
            let path = [Curve::unit_arc(0.0, 2.0), Curve::Line { from: C::from_polar(1.0, 2.0), to: C::from_polar(0.3, 2.0) }];
            let y = transport(&f, l, &path).unwrap();
            assert!(max_abs(&(y - phi_s(C::from_polar(0.3, 2.0), l).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn morphism_property() {
        let f = PointForm {
            simple: vec![(c(0.0, 0.0), Dpw::new(c(0.1, 0.0), c(0.5, 0.0), c(0.5, 0.2))), (c(2.0, 1.0), Dpw::new(c(-0.1, 0.0), c(0.0, 0.3), c(0.1, 0.0)))],
            double: vec![(c(-1.5, 0.5), Dpw::new(c(0.0, 0.0), c(0.2, 0.0), c(0.0, 0.1)))],
            constant: Dpw::zero(),
        };
        let l = c(0.8, 0.6);
        let a = Curve::Line { from: c(0.5, 0.5), to: c(1.0, -0.2) };
        let b = Curve::Arc { center: c(0.0, 0.0), radius: 1.0198, from: (-0.2f64).atan2(1.0), to: 2.5 };
        let whole = transport(&f, l, &[a, b]).unwrap();
        let parts = transport(&f, l, &[a]).unwrap() * transport(&f, l, &[b]).unwrap();
        assert!(max_abs(&(whole - parts)) < 1e-13);
        let back = transport(&f, l, &[b.reversed()]).unwrap();
        assert!(max_abs(&(transport(&f, l, &[b]).unwrap() * back - eye())) < 1e-12);
    }

    #[test]
    fn runge_kutta_matches_taylor() {
        let pot = ModelPotential(ModelKind::Spherical);
        let l = c(0.6, 0.8);
        let curve = Curve::unit_arc(0.0, 2.5);
        let rk = transport_potential(&crate::potentials::Pointwise(&pot), l, &curve, 1e-12).unwrap();
        let ty = transport(&pot.at(l), l, &[curve]).unwrap();
        assert!(max_abs(&(rk - ty)) < 1e-9);
    }

    #[test]
    fn pole_on_path_is_reported() {
        let f = PointForm { simple: vec![(c(0.5, 0.0), Dpw::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)))], ..Default::default() };
        let r = transport(&f, c(1.0, 0.0), &[Curve::Line { from: c(0.0, 0.0), to: c(1.0, 0.0) }]);
        assert!(r.is_err());
    }
}
