//! Principal solutions through a plumbing neck as the neck closes.
//!
//! For the family ξ_t = (b z + c t / z) dz / z with constant traceless b, c,
//! the corrected transport F(t) = P(γ)^{−log t / 2πi} P(β_t) along the curve
//! β_t from ε' to t/ε' has the limit exp(−ε'b) exp(−ε'c), and
//! P(β_t) = (I + t log t · e^{−ε'b}[b, c]e^{ε'b}) F(0) + O(t).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{expm, logm, max_abs, Mat2};
use crate::loopgroup::Dpw;
use crate::monodromy::ode::{split_arc, transport, Curve};
use crate::potentials::PointForm;
use crate::C;

/// One sample of the neck experiment.
#[derive(Clone, Debug, Serialize)]
pub struct NeckSample {
    pub t: f64,
    /// ‖F(t) − F(0)‖ (max entry).
    pub error: f64,
    /// ‖P(β_t) − F(0)‖, dominated by the t log t term.
    pub raw_error: f64,
    /// ‖P(β_t) − (I + t log t·D)F(0)‖, the remainder after the first-order term.
    pub remainder: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeckReport {
    pub eps_prime: f64,
    pub samples: Vec<NeckSample>,
    /// Least-squares slope of log error against log t.
    pub exponent: f64,
    pub raw_exponent: f64,
    /// Same for the remainder.
    pub remainder_exponent: f64,
    /// max error / t^{1/2} over the samples.
    pub constant: f64,
}

fn as_matrix(d: &Dpw) -> Mat2 {
    d.matrix(C::new(1.0, 0.0))
}

/// Log–log least-squares slope.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Corrected transport F(t) and the raw P(β_t) for real t in (0, ε'²).
pub fn neck_transport(b: &Dpw, c: &Dpw, t: f64, eps_prime: f64) -> Result<(Mat2, Mat2)> {
    let form = PointForm { simple: vec![], double: vec![(C::new(0.0, 0.0), c.scale(C::new(t, 0.0)))], constant: *b };
    let one = C::new(1.0, 0.0);
    let beta = Curve::Line { from: C::new(eps_prime, 0.0), to: C::new(t / eps_prime, 0.0) };
    let p_beta = transport(&form, one, &[beta])?;
    let p_gamma = transport(&form, one, &split_arc(C::new(0.0, 0.0), eps_prime, 0.0, 2.0 * PI))?;
    let power = logm(&p_gamma)? * (-C::new(t.ln(), 0.0) / C::new(0.0, 2.0 * PI));
    Ok((expm(&power) * p_beta, p_beta))
}

/// exp(−ε'b) exp(−ε'c).
pub fn neck_limit_value(b: &Dpw, c: &Dpw, eps_prime: f64) -> Mat2 {
    expm(&(as_matrix(b) * C::new(-eps_prime, 0.0))) * expm(&(as_matrix(c) * C::new(-eps_prime, 0.0)))
}

/// Runs the experiment over the given t values.
pub fn neck_limit(b: &Dpw, c: &Dpw, eps_prime: f64, ts: &[f64]) -> Result<NeckReport> {
    let f0 = neck_limit_value(b, c, eps_prime);
    let (bm, cm) = (as_matrix(b), as_matrix(c));
    let e = expm(&(bm * C::new(eps_prime, 0.0)));
    let d = expm(&(bm * C::new(-eps_prime, 0.0))) * (bm * cm - cm * bm) * e;
    let mut samples = Vec::new();
    for &t in ts {
        let (f, p_beta) = neck_transport(b, c, t, eps_prime)?;
        let first = (Mat2::identity() + d * C::new(t * t.ln(), 0.0)) * f0;
        samples.push(NeckSample { t, error: max_abs(&(f - f0)), raw_error: max_abs(&(p_beta - f0)), remainder: max_abs(&(p_beta - first)) });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let exponent = loglog_slope(&xs, &samples.iter().map(|s| s.error.max(1e-300)).collect::<Vec<_>>());
    let raw_exponent = loglog_slope(&xs, &samples.iter().map(|s| s.raw_error.max(1e-300)).collect::<Vec<_>>());
    let remainder_exponent = loglog_slope(&xs, &samples.iter().map(|s| s.remainder.max(1e-300)).collect::<Vec<_>>());
    let constant = samples.iter().map(|s| s.error / s.t.sqrt()).fold(0.0, f64::max);
    Ok(NeckReport { eps_prime, samples, exponent, raw_exponent, remainder_exponent, constant })
}

/// A generic non-commuting pair (b, c).
pub fn sample_family() -> (Dpw, Dpw) {
    let c = |re: f64, im: f64| C::new(re, im);
    (Dpw::new(c(0.3, 0.1), c(1.0, -0.2), c(0.4, 0.0)), Dpw::new(c(-0.2, 0.0), c(0.1, 0.3), c(0.8, 0.1)))
}

/// t values spaced evenly in log between `hi` and `lo`.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (hi.ln() + (lo.ln() - hi.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, eye};

    #[test]
    fn trivial_family_is_identity() {
        let z = Dpw::zero();
        let (f, p) = neck_transport(&z, &z, 1e-3, 0.25).unwrap();
        assert!(max_abs(&(f - eye())) < 1e-14 && max_abs(&(p - eye())) < 1e-14);
    }

    #[test]
    fn commuting_family_has_exact_limit() {
        // b and c commute: P(γ) = I and P(β_t) = exp(b(t/ε' − ε')) exp(−c(ε' − t/ε')) exactly.
        let b = Dpw::new(c(0.7, 0.2), c(0.0, 0.0), c(0.0, 0.0));
        let cc = Dpw::new(c(-0.3, 0.5), c(0.0, 0.0), c(0.0, 0.0));
        let (ep, t) = (0.25, 1e-3);
        let (_, p) = neck_transport(&b, &cc, t, ep).unwrap();
        let s = t / ep - ep;
        let want = expm(&(as_matrix(&b) * C::new(s, 0.0))) * expm(&(as_matrix(&cc) * C::new(s, 0.0)));
        assert!(max_abs(&(p - want)) < 1e-12);
    }

    #[test]
    fn generic_family_converges() {
        let (b, cc) = sample_family();
        let r = neck_limit(&b, &cc, 0.25, &log_grid(1e-2, 1e-5, 7)).unwrap();
        assert!(r.exponent >= 0.5, "{r:?}");
        assert!(r.samples.last().unwrap().error < 1e-3);
        // the first-order term accounts for the t log t part of P(β_t)
        assert!(r.remainder_exponent > r.raw_exponent + 0.05, "{r:?}");
    }
}
