//! Random inputs shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use phever::families::Gauge;
use phever::jets::{Chart, Jet, JetPoint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex64;

fn coef(rng: &mut ChaCha8Rng) -> String {
    format!("({:.6})", rng.random_range(-1.0..1.0))
}

/// Random polynomial in the given variables with exponents up to `deg` each.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[&str], deg: u32, terms: usize) -> String {
    let mut out = Vec::new();
    for _ in 0..terms {
        let mut t = coef(rng);
        for v in vars {
            let e = rng.random_range(0..=deg);
            if e > 0 {
                t.push_str(&format!("*{v}^{e}"));
            }
        }
        out.push(t);
    }
    out.join(" + ")
}

pub fn random_point(rng: &mut ChaCha8Rng, chart: Chart) -> JetPoint {
    let coords = std::array::from_fn(|_| C64::new(rng.random_range(0.3..1.4), rng.random_range(-0.5..0.5)));
    JetPoint::new(chart, coords).unwrap()
}

pub fn random_gauge(rng: &mut ChaCha8Rng) -> Gauge {
    // q' = q + small cubic keeps q'_q away from zero on the sample box
    let qprime = format!("q + {}*q^2 + {}*q^3", rng.random_range(-0.15..0.15), rng.random_range(-0.05..0.05));
    let h = random_poly(rng, &["q"], 3, 3);
    let sigma = random_poly(rng, &["q"], 3, 3);
    let l = random_poly(rng, &["q"], 3, 3);
    Gauge::parse(&qprime, &h, &sigma, &l).unwrap()
}

/// Elementary functions applied both to jets and to numbers.
pub const OUTER: usize = 6;

pub fn outer_jet(k: usize, u: &Jet) -> Jet {
    match k {
        0 => u.exp(),
        1 => u.sin(),
        2 => u.cos(),
        3 => u.add_const(C64::new(2.0, 0.0)).ln().unwrap(),
        4 => u.add_const(C64::new(2.0, 0.0)).sqrt().unwrap(),
        _ => u.add_const(C64::new(2.0, 0.0)).recip().unwrap(),
    }
}

pub fn outer_num(k: usize, u: C64) -> C64 {
    match k {
        0 => u.exp(),
        1 => u.sin(),
        2 => u.cos(),
        3 => (u + 2.0).ln(),
        4 => (u + 2.0).sqrt(),
        _ => (u + 2.0).inv(),
    }
}

/// `g(x, y) = Σ c_ij x^i y^j` over `i + j ≤ 2`; six coefficients.
pub fn inner_num(c: &[(f64, f64)], x: C64, y: C64) -> C64 {
    let mut out = C64::new(0.0, 0.0);
    let mut k = 0;
    for total in 0..=2 {
        for i in 0..=total {
            out += C64::new(c[k].0, c[k].1) * x.powu(i as u32) * y.powu((total - i) as u32);
            k += 1;
        }
    }
    out
}

pub fn inner_jet(c: &[(f64, f64)], x: &Jet, y: &Jet) -> Jet {
    let mut out = x.lift_const(C64::new(0.0, 0.0));
    let mut k = 0;
    for total in 0..=2 {
        for i in 0..=total {
            let mut term = x.lift_const(C64::new(c[k].0, c[k].1));
            for _ in 0..i {
                term = &term * x;
            }
            for _ in 0..(total - i) {
                term = &term * y;
            }
            out = &out + &term;
            k += 1;
        }
    }
    out
}

/// Largest relative deviation between jet and finite-difference derivatives of
/// `f(0.5·g(inner(x, y)))` up to second order.
pub fn chain_rule_error(f: usize, g: usize, coeffs: &[(f64, f64)], x0: C64, y0: C64) -> f64 {
    let num = |x: C64, y: C64| outer_num(f, outer_num(g, inner_num(coeffs, x, y)) * 0.5);
    let x = Jet::variable(2, 2, 0, x0).unwrap();
    let y = Jet::variable(2, 2, 1, y0).unwrap();
    let jet = outer_jet(f, &(outer_jet(g, &inner_jet(coeffs, &x, &y)) * 0.5));
    let scale = 1.0 + jet.value().norm();
    let h = 1e-5;
    let fx = (num(x0 + h, y0) - num(x0 - h, y0)) / (2.0 * h);
    let fy = (num(x0, y0 + h) - num(x0, y0 - h)) / (2.0 * h);
    let h = 1e-4;
    let fxy = (num(x0 + h, y0 + h) - num(x0 + h, y0 - h) - num(x0 - h, y0 + h) + num(x0 - h, y0 - h)) / (4.0 * h * h);
    let fxx = (num(x0 + h, y0) - num(x0, y0) * 2.0 + num(x0 - h, y0)) / (h * h);
    let fyy = (num(x0, y0 + h) - num(x0, y0) * 2.0 + num(x0, y0 - h)) / (h * h);
    [
        jet.value() - num(x0, y0),
        jet.d(0) - fx,
        jet.d(1) - fy,
        jet.partial(&[1, 1]) - fxy,
        jet.partial(&[2, 0]) - fxx,
        jet.partial(&[0, 2]) - fyy,
    ]
    .iter()
    .map(|d| d.norm() / scale)
    .fold(0.0, f64::max)
}
