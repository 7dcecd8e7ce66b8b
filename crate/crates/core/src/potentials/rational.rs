//! Rational 1-forms in one coordinate for a fixed λ, Möbius maps between
//! coordinates, and λ-families of such forms.

use crate::linalg::Mat2;
use crate::loopgroup::{Dpw, Potential};
use crate::C;

/// Point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pt {
    Fin(C),
    Inf,
}

impl Pt {
    /// Treats non-finite values as ∞.
    pub fn from_c(z: C) -> Pt {
        if z.re.is_finite() && z.im.is_finite() {
            Pt::Fin(z)
        } else {
            Pt::Inf
        }
    }

    pub fn finite(self) -> Option<C> {
        match self {
            Pt::Fin(z) => Some(z),
            Pt::Inf => None,
        }
    }
}

/// z ↦ (a z + b)/(c z + d).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    pub fn new(a: C, b: C, c: C, d: C) -> Self {
        Mobius { a, b, c, d }
    }

    pub fn identity() -> Self {
        let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
        Mobius::new(o, z, z, o)
    }

    pub fn apply(&self, p: Pt) -> Pt {
        match p {
            Pt::Fin(z) => {
                let den = self.c * z + self.d;
                if den == C::new(0.0, 0.0) {
                    Pt::Inf
                } else {
                    Pt::from_c((self.a * z + self.b) / den)
                }
            }
            Pt::Inf => {
                if self.c == C::new(0.0, 0.0) {
                    Pt::Inf
                } else {
                    Pt::Fin(self.a / self.c)
                }
            }
        }
    }

    pub fn apply_c(&self, z: C) -> C {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn inverse(&self) -> Self {
        Mobius::new(self.d, -self.b, -self.c, self.a)
    }

    /// self ∘ other.
    pub fn compose(&self, o: &Self) -> Self {
        Mobius::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn deriv(&self, z: C) -> C {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }
}

/// Σ R_a dz/(z − a) + Σ D_b dz/(z − b)² + K dz in one coordinate, for one λ.
/// A pole at ∞ is implicit, with residue −Σ R_a.
#[derive(Clone, Debug, Default)]
pub struct PointForm {
    pub simple: Vec<(C, Dpw)>,
    pub double: Vec<(C, Dpw)>,
    pub constant: Dpw,
}

impl PointForm {
    pub fn eval(&self, z: C) -> Dpw {
        let mut acc = self.constant;
        for (a, r) in &self.simple {
            acc += r.scale((z - a).inv());
        }
        for (b, d) in &self.double {
            let e = (z - b).inv();
            acc += d.scale(e * e);
        }
        acc
    }

    pub fn matrix(&self, z: C, lambda: C) -> Mat2 {
        self.eval(z).matrix(lambda)
    }

    pub fn residue_sum(&self) -> Dpw {
        self.simple.iter().fold(Dpw::zero(), |acc, (_, r)| acc + *r)
    }

    /// Distance from z to the nearest finite pole.
    pub fn nearest_pole(&self, z: C) -> f64 {
        self.simple
            .iter()
            .map(|(a, _)| (z - a).norm())
            .chain(self.double.iter().map(|(b, _)| (z - b).norm()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Taylor coefficients of the dz-coefficient at z0, orders 0..out.len().
    pub fn taylor(&self, z0: C, out: &mut [Dpw]) {
        for o in out.iter_mut() {
            *o = Dpw::zero();
        }
        if let Some(first) = out.first_mut() {
            *first = self.constant;
        }
        let k = out.len();
        for (a, r) in &self.simple {
            // 1/(z0 − a + h) = Σ (−1)^n h^n / (z0 − a)^{n+1}
            let e = (z0 - a).inv();
            let mut p = e;
            for o in out.iter_mut().take(k) {
                *o += r.scale(p);
                p *= -e;
            }
        }
        for (b, d) in &self.double {
            // 1/(z0 − b + h)² = Σ (n+1)(−1)^n h^n / (z0 − b)^{n+2}
            let e = (z0 - b).inv();
            let mut p = e * e;
            for (n, o) in out.iter_mut().enumerate() {
                *o += d.scale(p * (n as f64 + 1.0));
                p *= -e;
            }
        }
    }

    /// Pull back along z = m(w): the result is the same form in w.
    pub fn pullback(&self, m: &Mobius) -> PointForm {
        let inv = m.inverse();
        let mut out = PointForm::default();
        let mut inf_res = Dpw::zero();
        for (a, r) in &self.simple {
            inf_res = inf_res - *r;
            if let Pt::Fin(w) = inv.apply(Pt::Fin(*a)) {
                out.simple.push((w, *r));
            }
        }
        if inf_res.norm() > 0.0 {
            if let Pt::Fin(w) = inv.apply(Pt::Inf) {
                out.simple.push((w, inf_res));
            }
        }
        for (b, d) in &self.double {
            match inv.apply(Pt::Fin(*b)) {
                Pt::Fin(w) => out.double.push((w, d.scale(m.deriv(w).inv()))),
                Pt::Inf => {
                    // The double pole sits at w = ∞ and becomes a constant.
                    let det = m.a * m.d - m.b * m.c;
                    out.constant += d.scale(m.c * m.c / det);
                }
            }
        }
        if self.constant.norm() > 0.0 {
            // K dz = K m'(w) dw is not rational of this shape unless m is affine.
            assert!(m.c == C::new(0.0, 0.0), "constant term pulled back by a non-affine map");
            out.constant += self.constant.scale(m.a / m.d);
        }
        out
    }

    pub fn dual(&self) -> PointForm {
        PointForm {
            simple: self.simple.iter().map(|(a, r)| (*a, r.dual())).collect(),
            double: self.double.iter().map(|(b, d)| (*b, d.dual())).collect(),
            constant: self.constant.dual(),
        }
    }

    pub fn add(&self, o: &PointForm) -> PointForm {
        let mut out = self.clone();
        out.simple.extend(o.simple.iter().copied());
        out.double.extend(o.double.iter().copied());
        out.constant += o.constant;
        out
    }

    pub fn scale(&self, s: C) -> PointForm {
        PointForm {
            simple: self.simple.iter().map(|(a, r)| (*a, r.scale(s))).collect(),
            double: self.double.iter().map(|(b, d)| (*b, d.scale(s))).collect(),
            constant: self.constant.scale(s),
        }
    }
}

/// A loop-valued rational form on one chart, given pointwise in λ.
pub trait RationalLoopForm: Sync {
    fn at(&self, lambda: C) -> PointForm;
}

/// Pointwise-evaluation view of a [`RationalLoopForm`].
pub struct Pointwise<'a>(pub &'a dyn RationalLoopForm);

impl Potential for Pointwise<'_> {
    fn matrix(&self, z: C, lambda: C) -> Mat2 {
        self.0.at(lambda).matrix(z, lambda)
    }
}

/// The dual potential [[−α, γ/λ],[β, α]].
pub struct Dual<'a>(pub &'a dyn RationalLoopForm);

impl RationalLoopForm for Dual<'_> {
    fn at(&self, lambda: C) -> PointForm {
        self.0.at(lambda).dual()
    }
}

pub fn dual(f: &dyn RationalLoopForm) -> Dual<'_> {
    Dual(f)
}
