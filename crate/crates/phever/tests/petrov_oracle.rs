//! Petrov types of quartics with integer roots, against an exact oracle that
//! reads multiplicities off repeated gcds with the derivative.

use num_complex::Complex64;
use num_rational::Ratio;
use phever::classify::{petrov_from_coefficients, PetrovType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C64 = Complex64;
type Q = Ratio<i128>;

fn trim(mut p: Vec<Q>) -> Vec<Q> {
    while p.last().is_some_and(|c| *c == Q::from_integer(0)) {
        p.pop();
    }
    p
}

fn deriv(p: &[Q]) -> Vec<Q> {
    trim(p.iter().enumerate().skip(1).map(|(k, c)| c * Q::from_integer(k as i128)).collect())
}

fn rem(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut r = a.to_vec();
    let lead = *b.last().unwrap();
    while r.len() >= b.len() && !r.is_empty() {
        let f = *r.last().unwrap() / lead;
        let shift = r.len() - b.len();
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= f * c;
        }
        r.pop();
        r = trim(r);
    }
    r
}

fn gcd(a: &[Q], b: &[Q]) -> Vec<Q> {
    let (mut a, mut b) = (trim(a.to_vec()), trim(b.to_vec()));
    while !b.is_empty() {
        let r = rem(&a, &b);
        a = b;
        b = r;
    }
    a
}

fn degree(p: &[Q]) -> usize {
    p.len().saturating_sub(1)
}

/// Partition of 4 from the root multiplicities of `p` (degree ≤ 4), the
/// deficit in degree being a root at infinity.
fn oracle(p: &[Q]) -> PetrovType {
    let p = trim(p.to_vec());
    let mut mults = Vec::new();
    if degree(&p) < 4 {
        mults.push(4 - degree(&p));
    }
    // counts[k] = number of distinct roots of multiplicity > k
    let mut counts = Vec::new();
    let mut g = p.clone();
    while degree(&g) > 0 {
        let next = gcd(&g, &deriv(&g));
        counts.push(degree(&g) - degree(&next));
        g = next;
    }
    for k in 0..counts.len() {
        let exactly = counts[k] - counts.get(k + 1).copied().unwrap_or(0);
        mults.extend(std::iter::repeat_n(k + 1, exactly));
    }
    mults.sort_unstable_by(|a, b| b.cmp(a));
    match mults.as_slice() {
        [1, 1, 1, 1] => PetrovType::I,
        [2, 1, 1] => PetrovType::II,
        [2, 2] => PetrovType::D,
        [3, 1] => PetrovType::III,
        [4] => PetrovType::N,
        other => panic!("not a partition of 4: {other:?}"),
    }
}

fn expand(roots: &[i128], lead: i128) -> Vec<Q> {
    let mut p = vec![Q::from_integer(lead)];
    for r in roots {
        let mut next = vec![Q::from_integer(0); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * Q::from_integer(*r);
        }
        p = next;
    }
    p
}

/// Coefficients (c1..c5) of `c1ζ⁴ + 4c2ζ³ + 6c3ζ² + 4c4ζ + c5` for ascending `p`.
fn coefficients(p: &[Q], scale: C64) -> [C64; 5] {
    let at = |k: usize| p.get(k).map_or(0.0, |c| *c.numer() as f64 / *c.denom() as f64);
    [
        scale * at(4),
        scale * (at(3) / 4.0),
        scale * (at(2) / 6.0),
        scale * (at(1) / 4.0),
        scale * at(0),
    ]
}

fn random_roots(rng: &mut ChaCha8Rng) -> Vec<i128> {
    let finite = 4 - if rng.random_bool(0.15) { rng.random_range(1..=3) } else { 0 };
    if rng.random_bool(0.5) {
        // a forced multiplicity pattern with distinct root values
        let patterns: [&[usize]; 5] = [&[1, 1, 1, 1], &[2, 1, 1], &[2, 2], &[3, 1], &[4]];
        let pattern = patterns[rng.random_range(0..patterns.len())];
        let mut values: Vec<i128> = Vec::new();
        while values.len() < pattern.len() {
            let v = rng.random_range(-4..=4);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        let mut roots: Vec<i128> = pattern.iter().zip(&values).flat_map(|(&m, &v)| std::iter::repeat_n(v, m)).collect();
        roots.truncate(finite);
        roots
    } else {
        (0..finite).map(|_| rng.random_range(-4..=4)).collect()
    }
}

#[test]
fn integer_root_quartics_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = std::collections::BTreeMap::new();
    for case in 0..1000 {
        let roots = random_roots(&mut rng);
        let lead = rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
        let p = expand(&roots, lead);
        let expected = oracle(&p);
        let scale = C64::from_polar(rng.random_range(0.1..10.0), rng.random_range(0.0..std::f64::consts::TAU));
        let cf = coefficients(&p, scale);
        let got = petrov_from_coefficients(&cf, 1e-6).unwrap_or_else(|e| panic!("case {case} roots {roots:?}: {e}"));
        assert_eq!(got.kind, expected, "case {case}: roots {roots:?}");
        let rev = [cf[4], cf[3], cf[2], cf[1], cf[0]];
        assert_eq!(petrov_from_coefficients(&rev, 1e-6).unwrap().kind, expected, "reversed case {case}");
        *seen.entry(format!("{expected}")).or_insert(0) += 1;
    }
    for t in ["I", "II", "D", "III", "N"] {
        assert!(seen.get(t).copied().unwrap_or(0) > 20, "type {t} undersampled: {seen:?}");
    }
}

#[test]
fn partition_reported_with_type() {
    let p = expand(&[1, 1, -2, -2], 1);
    let r = petrov_from_coefficients(&coefficients(&p, C64::new(1.0, 0.0)), 1e-6).unwrap();
    assert_eq!(r.kind, PetrovType::D);
    assert_eq!(r.partition, vec![2, 2]);
    let mut roots: Vec<f64> = r.roots.iter().map(|z| z.unwrap().re).collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (got, want) in roots.iter().zip([-2.0, -2.0, 1.0, 1.0]) {
        assert!((got - want).abs() < 1e-5);
    }
}
