mod common;

use common::{chain_rule_error, inner_jet, outer_jet, C64, OUTER};
use phever::jets::Jet;
use proptest::prelude::*;

const NV: usize = 2;
const ORDER: usize = 3;

fn jet_from(vals: &[(f64, f64)]) -> Jet {
    let n = Jet::zero(NV, ORDER).unwrap().coeffs().len();
    let coeffs = vals.iter().take(n).map(|&(a, b)| C64::new(a, b)).collect();
    Jet::from_coeffs(NV, ORDER, coeffs).unwrap()
}

fn coeff_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    let n = Jet::zero(NV, ORDER).unwrap().coeffs().len();
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    (a - b).max_abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_axioms(a in coeff_strategy(), b in coeff_strategy(), c in coeff_strategy()) {
        let (a, b, c) = (jet_from(&a), jet_from(&b), jet_from(&c));
        prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), 1e-13));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-13));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
        let one = a.lift_const(C64::new(1.0, 0.0));
        prop_assert!(close(&(&a * &one), &a, 0.0));
        prop_assert!(close(&(&a - &a), &a.lift_const(C64::new(0.0, 0.0)), 0.0));
    }

    #[test]
    fn product_is_truncated_convolution(a in coeff_strategy(), b in coeff_strategy()) {
        let (a, b) = (jet_from(&a), jet_from(&b));
        let prod = &a * &b;
        let monos = a.layout().monomials().to_vec();
        let mut naive = vec![C64::new(0.0, 0.0); monos.len()];
        for (i, ma) in monos.iter().enumerate() {
            for (j, mb) in monos.iter().enumerate() {
                let sum = [ma[0] + mb[0], ma[1] + mb[1]];
                if (sum[0] + sum[1]) as usize > ORDER {
                    continue;
                }
                let k = a.layout().index_of(&sum).unwrap();
                naive[k] += a.coeffs()[i] * b.coeffs()[j];
            }
        }
        for (x, y) in prod.coeffs().iter().zip(&naive) {
            prop_assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn reciprocal_inverts(a in coeff_strategy()) {
        let mut a = jet_from(&a);
        a = a.add_const(C64::new(3.0, 0.0));
        let r = a.recip().unwrap();
        prop_assert!(close(&(&a * &r), &a.lift_const(C64::new(1.0, 0.0)), 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_rule_matches_finite_differences(
        f in 0..OUTER,
        g in 0..OUTER,
        coeffs in prop::collection::vec((-0.4..0.4f64, -0.4..0.4f64), 6),
        x0 in (0.1..0.9f64, -0.3..0.3f64),
        y0 in (0.1..0.9f64, -0.3..0.3f64),
    ) {
        let (x0, y0) = (C64::new(x0.0, x0.1), C64::new(y0.0, y0.1));
        let err = chain_rule_error(f, g, &coeffs, x0, y0);
        prop_assert!(err <= 1e-6, "relative deviation {err:e}");
        let x = Jet::variable(2, 2, 0, x0).unwrap();
        let y = Jet::variable(2, 2, 1, y0).unwrap();
        let jet = outer_jet(f, &(outer_jet(g, &inner_jet(&coeffs, &x, &y)) * 0.5));
        let scale = 1.0 + jet.value().norm();

        // composing a one-variable jet of the outer function gives the same result
        let inner = outer_jet(g, &inner_jet(&coeffs, &x, &y)) * 0.5;
        let u = Jet::variable(1, 2, 0, inner.value()).unwrap();
        let composed = outer_jet(f, &u).compose(&[inner]).unwrap();
        prop_assert!((&composed - &jet).max_abs() < 1e-12 * scale);
    }
}
