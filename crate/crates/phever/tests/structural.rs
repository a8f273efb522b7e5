//! Identities that hold by construction: the middle triplet for any key
//! function, gauge pullbacks, the Liouville identity and the Abel example.

mod common;

use common::{random_gauge, random_point, random_poly, C64};
use nalgebra::Matrix4;
use phever::expr;
use phever::families::{
    gauge_transform, hh_residual, liouville_residual, middle_triplet_residuals, FamilyId, FamilySpec, KeyFunctionSpec,
};
use phever::geometry::{values, weyl_coefficients, ConventionSet, MetricField};
use phever::jets::{Chart, JetPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn middle_triplet_vanishes_for_random_key_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let w = random_poly(&mut rng, &["q", "x", "y"], 3, 6);
        let lambda = C64::new(rng.random_range(-3.0..3.0), 0.0);
        let key = KeyFunctionSpec::parse(&w, lambda).unwrap();
        let pt = random_point(&mut rng, Chart::Y);
        let (a, q, b) = key.abqs(&pt, 2).unwrap();
        let r = middle_triplet_residuals(&a, &q, &b, pt.coords[2], lambda);
        let scale = 1.0 + [&a, &q, &b].iter().map(|j| j.max_abs()).fold(0.0, f64::max);
        let m = r.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale;
        worst = worst.max(m);
        assert!(m <= 1e-10, "W = {w}: {r:?}");
    }
    println!("worst middle-triplet residual {worst:e}");
}

#[test]
fn hyperheavenly_residual_examples() {
    let pt = JetPoint::new(Chart::Y, [0.3, 0.2, 1.0, 0.6].map(|v| C64::new(v, 0.0))).unwrap();
    let key = KeyFunctionSpec::parse("x^4", C64::new(0.0, 0.0)).unwrap();
    let w = key.w_jet(&pt, 2).unwrap();
    assert!((hh_residual(&w, pt.coords[2], C64::new(0.0, 0.0)) + 3.0).norm() < 1e-12);
    let reference = KeyFunctionSpec::parse("x^2*y^2/4 - y^2/(4*x)", C64::new(3.0, 0.0)).unwrap();
    assert!(reference.hh_residual(&pt).unwrap().norm() < 1e-12);
}

#[test]
fn gauge_pullback_of_family_key_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let conv = ConventionSet::embedded();
    for id in [FamilyId::TypeDpppp, FamilyId::TypeDppmm, FamilyId::GenericW] {
        let family = FamilySpec::new(id).build().unwrap();
        let key = family.key_function().unwrap().clone();
        let lambda = family.lambda();
        for _ in 0..5 {
            let gauge = random_gauge(&mut rng);
            let gk = gauge_transform(&key, &gauge).unwrap();
            let p = random_point(&mut rng, Chart::Y);
            let fwd = gauge.forward(&p, 1).unwrap();
            let jac = Matrix4::<C64>::from_fn(|a, b| fwd[a].d(b));
            let pp = JetPoint::new(Chart::Y, fwd.clone().map(|j| j.value())).unwrap();
            let g = values(&key.metric(&p, 0).unwrap());
            let gp = values(&gk.metric(&pp, 0).unwrap());
            let pulled = jac.transpose() * gp * jac;
            let err = (pulled - g).norm() / g.norm().max(1.0);
            assert!(err <= 1e-9, "{id}: pullback mismatch {err:e}");
            // the gauged metric is Einstein with the same constant
            let wd = weyl_coefficients(&gk, Some(&conv), &pp).unwrap();
            let rel = (wd.r + lambda * 4.0).norm() / wd.riemann_scale.max(1.0);
            assert!(rel <= 1e-8, "{id}: gauged R + 4Λ = {rel:e}");
        }
    }
}

#[test]
fn liouville_identity_for_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        // constant shifts keep q + F away from zero at the evaluation point
        let f = format!("{} + 2", random_poly(&mut rng, &["w"], 3, 3));
        let q = format!("{} + 2", random_poly(&mut rng, &["q"], 3, 3));
        let fe = expr::parse_in(&f, "w").unwrap();
        let qe = expr::parse_in(&q, "q").unwrap();
        let at_q = C64::new(rng.random_range(0.2..0.8), rng.random_range(-0.2..0.2));
        let at_w = C64::new(rng.random_range(0.2..0.8), rng.random_range(-0.2..0.2));
        let r = liouville_residual(&fe, &qe, at_q, at_w).unwrap();
        assert!(r.norm() <= 1e-10, "F = {f}, Q = {q}: {r}");
    }
}

#[test]
fn abel_example_solves_abel_equation() {
    let family = FamilySpec::new(FamilyId::TypeIIpppp).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    while checked < 10 {
        let p = random_point(&mut rng, Chart::W);
        if family.check_point(&p, 1e-8).is_err() {
            continue;
        }
        let r = family.abel_residual(&p).unwrap().unwrap();
        assert!(r.norm() <= 1e-9, "{r}");
        checked += 1;
    }
}
