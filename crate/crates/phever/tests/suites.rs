//! End-to-end suite behavior: reproducibility, configuration, sampling
//! failures and verdicts outside the catalog defaults.

use phever::classify::{master_residuals, SymmetryVector};
use phever::families::{FamilyId, FamilySpec};
use phever::geometry::ConventionSet;
use phever::jets::{Chart, JetPoint};
use phever::verify::{catalog, run_suite, ClaimMode, SuiteConfig, Verdict, VerifyError};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(id: FamilyId) -> SuiteConfig {
    let mut cfg = SuiteConfig::new(FamilySpec::new(id));
    cfg.points = 5;
    cfg
}

#[test]
fn same_seed_gives_identical_reports() {
    let conv = ConventionSet::embedded();
    let cfg = small(FamilyId::TypeDppmm);
    let a = run_suite(&cfg, &conv).unwrap().to_json();
    let b = run_suite(&cfg, &conv).unwrap().to_json();
    assert_eq!(a, b);

    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, run_suite(&other, &conv).unwrap().to_json());
}

#[test]
fn higher_jet_order_keeps_verdicts() {
    let conv = ConventionSet::embedded();
    for id in [FamilyId::TypeIIpppp, FamilyId::TypeIIIppmm, FamilyId::TypeN2d] {
        let mut cfg = small(id);
        let low = run_suite(&cfg, &conv).unwrap();
        cfg.jet_order = 5;
        let high = run_suite(&cfg, &conv).unwrap();
        assert_eq!(low.verdict, high.verdict, "{id}");
        for (l, h) in low.records.iter().zip(&high.records) {
            assert_eq!((l.sd_type, l.asd_type), (h.sd_type, h.asd_type), "{id} draw {}", l.draw);
            assert_eq!(l.optics, h.optics);
        }
    }
}

#[test]
fn constant_q_profile_cannot_be_sampled() {
    // Q = 1 makes the Liouville profile degenerate everywhere
    let conv = ConventionSet::embedded();
    let spec = FamilySpec::new(FamilyId::TypeIIpppp).with("Q", "1").unwrap();
    let mut cfg = SuiteConfig::new(spec);
    cfg.points = 3;
    match run_suite(&cfg, &conv) {
        Err(VerifyError::Sampling { accepted, wanted, draws, .. }) => {
            assert_eq!(wanted, 3);
            assert!(accepted < wanted);
            assert_eq!(draws, 300);
        }
        other => panic!("expected a sampling failure, got {other:?}"),
    }
}

#[test]
fn toml_configuration() {
    let cfg = SuiteConfig::from_toml(
        r#"
points = 7
seed = 9
jet_order = 5

[family]
family = "type-d-ppmm"
params = { b0 = "1" }

[tolerances]
einstein = 1e-7

[sample_box]
lo = 0.3
hi = 1.2
real = true
"#,
    )
    .unwrap();
    assert_eq!(cfg.points, 7);
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.family.family, FamilyId::TypeDppmm);
    assert_eq!(cfg.family.params["b0"], "1");
    assert_eq!(cfg.tolerances.einstein, 1e-7);
    assert_eq!(cfg.tolerances.classify, 1e-6);
    assert!(cfg.sample_box.real);
    assert_eq!(cfg.claim, ClaimMode::Family);

    let err = SuiteConfig::from_toml("points = 3\nbogus = 1\n[family]\nfamily = \"type-d-pppp\"\n").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, VerifyError::ConfigParse(_)));
    assert!(msg.contains("line 2"), "{msg}");
    assert!(msg.contains("bogus"), "{msg}");

    let err = SuiteConfig::from_toml("points = 0\n[family]\nfamily = \"type-d-pppp\"\n").unwrap_err();
    assert!(matches!(err, VerifyError::Config(_)), "{err}");
    let err = SuiteConfig::from_toml("jet_order = 3\n[family]\nfamily = \"type-d-pppp\"\n").unwrap_err();
    assert!(matches!(err, VerifyError::Config(_)), "{err}");
    let err = SuiteConfig::from_toml("[family]\nfamily = \"type-q\"\n").unwrap_err();
    assert!(matches!(err, VerifyError::ConfigParse(_)), "{err}");
}

#[test]
fn nonexistence_row() {
    let conv = ConventionSet::embedded();
    let mut cfg = catalog(42).pop().unwrap();
    cfg.points = 5;
    assert_eq!(cfg.claim, ClaimMode::Nonexistence);
    let report = run_suite(&cfg, &conv).unwrap();
    assert_eq!(report.verdict, Verdict::Nonexistent);
    assert!(report.records.iter().all(|r| r.asd_max <= 1e-12));

    // switching on E_zzz brings the anti-self-dual part back
    cfg.family = FamilySpec::new(FamilyId::EdGeneric).with("E", "z^3").unwrap();
    let report = run_suite(&cfg, &conv).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert!(report.failures().iter().any(|f| f.contains("ASD coefficients vanish")));
}

#[test]
fn non_solution_key_function_fails() {
    let conv = ConventionSet::embedded();
    let mut cfg = small(FamilyId::GenericW);
    assert_eq!(run_suite(&cfg, &conv).unwrap().verdict, Verdict::Pass);
    cfg.family = FamilySpec::new(FamilyId::GenericW).with("W", "x^4").unwrap();
    let report = run_suite(&cfg, &conv).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    let failures = report.failures();
    assert!(failures.iter().any(|f| f.contains("hyperheavenly equation")), "{failures:?}");
}

#[test]
fn unit_q_translation_is_not_a_type_ii_symmetry() {
    let family = FamilySpec::new(FamilyId::TypeIIpppp).build().unwrap();
    let k = SymmetryVector::new("1", "0", "0", C64::new(0.0, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut smallest = f64::INFINITY;
    let mut checked = 0;
    while checked < 10 {
        let coords = [0; 4].map(|_| C64::new(rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)));
        let pt = JetPoint::new(Chart::W, coords).unwrap();
        if family.check_point(&pt, 1e-8).is_err() {
            continue;
        }
        let Ok(Some(ed)) = family.ed_jets(&pt, 4) else { continue };
        let r = master_residuals(&ed, &k).unwrap();
        smallest = smallest.min(r.iter().map(|v| v.norm()).fold(0.0, f64::max));
        checked += 1;
    }
    assert!(smallest >= 1e-3, "master residual as small as {smallest:e}");
}
