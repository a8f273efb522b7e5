//! Verification suites: seeded point sampling, residual aggregation,
//! classification against the family's claims, symmetry checks and reports.
//!
//! A suite is deterministic in (family, parameters, seed, calibration). Points
//! are drawn sequentially, evaluated in parallel, and merged in draw order.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    algebra_identify, congruence_optics, killing_residual, master_residuals, nullstring_residuals,
    petrov_from_coefficients, structure_constants, table1_type, AlgebraName, ClassifyError, PetrovType,
};
use crate::families::{
    middle_triplet_residuals, reduced_residuals, Family, FamilyError, FamilyId, FamilySpec,
};
use crate::geometry::{frame_curvature, ConventionSet, GeometryError, MetricField};
use crate::jets::{JetError, JetPoint};

type C64 = Complex64;

pub const SCHEMA_VERSION: u32 = 1;

/// Draw budget per requested point.
pub const DRAWS_PER_POINT: usize = 100;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("sampling failure for {family}: {accepted} of {wanted} points after {draws} draws; most frequent violation: {constraint}")]
    Sampling {
        family: FamilyId,
        wanted: usize,
        accepted: usize,
        draws: usize,
        constraint: String,
    },
    #[error("invalid suite configuration: {0}")]
    Config(String),
    #[error("suite configuration: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

pub type VerifyResult<T> = Result<T, VerifyError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|R + 4Λ|` and traceless Ricci, relative to the local Riemann scale.
    pub einstein: f64,
    /// Key-function and null-string identities.
    pub structural: f64,
    /// Reduced field equations and the Abel equation.
    pub reduced: f64,
    /// Self-dual coefficients against `(0, 0, −2x³, 0, 0)`, relative.
    pub self_dual: f64,
    pub killing: f64,
    /// Root clustering in the Petrov classification.
    pub classify: f64,
    /// Nonvanishing claims and optics labels.
    pub nonvanish: f64,
    /// Vanishing of every anti-self-dual coefficient for the nonexistence claim.
    pub nonexistence: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            einstein: 1e-8,
            structural: 1e-10,
            reduced: 1e-9,
            self_dual: 1e-9,
            killing: 1e-9,
            classify: 1e-6,
            nonvanish: 1e-8,
            nonexistence: 1e-12,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> VerifyResult<()> {
        let all = [
            ("einstein", self.einstein),
            ("structural", self.structural),
            ("reduced", self.reduced),
            ("self_dual", self.self_dual),
            ("killing", self.killing),
            ("classify", self.classify),
            ("nonvanish", self.nonvanish),
            ("nonexistence", self.nonexistence),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VerifyError::Config(format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Real and imaginary parts of every coordinate are drawn uniformly from `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
    /// Draw real points only (imaginary parts zero).
    #[serde(default)]
    pub real: bool,
}

impl Default for SampleBox {
    fn default() -> SampleBox {
        SampleBox {
            lo: 0.2,
            hi: 1.5,
            real: false,
        }
    }
}

/// What the suite tests the family against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimMode {
    /// The family's own type symbol, optics and algebra.
    #[default]
    Family,
    /// The anti-self-dual Weyl spinor vanishes: the claimed type does not exist.
    Nonexistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub family: FamilySpec,
    pub points: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub sample_box: SampleBox,
    /// Order of the (E, D) jets used for classification.
    pub jet_order: usize,
    /// Reject points where a nonvanishing claim fails. Turning this off keeps
    /// only the denominator guards, for residual checks outside the claim.
    pub require_nonvanishing: bool,
    pub claim: ClaimMode,
    /// Overrides the family's claim label in the report.
    pub label: Option<String>,
}

impl Default for SuiteConfig {
    fn default() -> SuiteConfig {
        SuiteConfig::new(FamilySpec::new(FamilyId::TypeDpppp))
    }
}

impl SuiteConfig {
    pub fn new(family: FamilySpec) -> SuiteConfig {
        SuiteConfig {
            family,
            points: 20,
            seed: 42,
            tolerances: Tolerances::default(),
            sample_box: SampleBox::default(),
            jet_order: 4,
            require_nonvanishing: true,
            claim: ClaimMode::Family,
            label: None,
        }
    }

    /// Parse a TOML suite description; errors carry line and column.
    pub fn from_toml(text: &str) -> VerifyResult<SuiteConfig> {
        let cfg: SuiteConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> VerifyResult<()> {
        if self.points == 0 {
            return Err(VerifyError::Config("point count must be at least 1".into()));
        }
        if !(self.sample_box.lo.is_finite() && self.sample_box.hi.is_finite() && self.sample_box.lo < self.sample_box.hi) {
            return Err(VerifyError::Config(format!(
                "sample box [{}, {}] is empty",
                self.sample_box.lo, self.sample_box.hi
            )));
        }
        if self.jet_order < 4 {
            return Err(VerifyError::Config("jet order must be at least 4".into()));
        }
        self.tolerances.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "AMBIGUOUS")]
    Ambiguous,
    #[serde(rename = "NONEXISTENT-AS-CLAIMED")]
    Nonexistent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Ambiguous => "AMBIGUOUS",
            Verdict::Nonexistent => "NONEXISTENT-AS-CLAIMED",
        })
    }
}

/// Everything measured at one accepted point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    /// Draw index in the seeded sequence.
    pub draw: usize,
    pub chart: String,
    pub point: [C64; 4],
    /// Hyperheavenly coordinates (q, p, x, y).
    pub hyperheavenly: [C64; 4],
    pub riemann_scale: f64,
    /// `|R + 4Λ|`, relative to `max(1, riemann_scale)`.
    pub einstein_scalar: f64,
    /// Largest traceless Ricci component, relative.
    pub traceless_ricci: f64,
    pub sd_coefficients: [C64; 5],
    pub asd_coefficients: [C64; 5],
    /// Distance of the self-dual coefficients from `(0, 0, −2x³, 0, 0)`, relative
    /// to the largest of `2|x|³`, the ASD coefficients and the Riemann scale.
    pub sd_residual: f64,
    pub asd_max: f64,
    pub sd_type: Option<PetrovType>,
    pub asd_type: Option<PetrovType>,
    /// Type from the (E, D) decision tree, where available.
    pub asd_table: Option<PetrovType>,
    pub ambiguity: Option<String>,
    pub hh_residual: Option<f64>,
    pub middle_triplet: Option<f64>,
    pub reduced: Option<[f64; 2]>,
    pub abel: Option<f64>,
    pub nullstring: f64,
    pub optics: Option<String>,
    pub killing: Vec<f64>,
    /// Largest reduced symmetry-equation residual per generator.
    pub master: Vec<Option<f64>>,
}

/// Worst value of one residual over all points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Agreement of one classification with the claim over all points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCheck {
    pub name: String,
    pub expected: String,
    pub mismatches: usize,
    pub observed: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub name: String,
    pub vector: String,
    pub chi0: C64,
    pub killing_max: f64,
    pub master_max: Option<f64>,
    /// `Some(true)` for a proper homothety (χ₀ ≠ 0) with Λχ₀ = 0.
    pub proper_homothety: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub generators: Vec<GeneratorReport>,
    pub structure_constants: Option<Vec<Vec<Vec<C64>>>>,
    pub fit_residual: Option<f64>,
    pub algebra: Option<AlgebraName>,
    pub expected: Option<AlgebraName>,
    pub error: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub family: FamilyId,
    pub claim: String,
    pub claim_mode: ClaimMode,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub points_requested: usize,
    pub draws: usize,
    pub jet_order: usize,
    pub require_nonvanishing: bool,
    pub sample_box: SampleBox,
    pub tolerances: Tolerances,
    pub calibration: String,
    pub calibration_fingerprint: String,
    pub records: Vec<PointRecord>,
    pub checks: Vec<Check>,
    pub labels: Vec<LabelCheck>,
    pub symmetry: SymmetryReport,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Names of the checks that did not pass.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        out.extend(self.labels.iter().filter(|c| !c.passed).map(|c| c.name.clone()));
        if !self.symmetry.passed {
            out.push("symmetry".into());
        }
        out
    }
}

fn sample(rng: &mut ChaCha8Rng, b: &SampleBox) -> [C64; 4] {
    std::array::from_fn(|_| {
        let re = rng.random_range(b.lo..=b.hi);
        let im = if b.real { 0.0 } else { rng.random_range(b.lo..=b.hi) };
        C64::new(re, im)
    })
}

fn rel(v: f64, scale: f64) -> f64 {
    v / scale.max(1.0)
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn is_constraint(e: &VerifyError) -> Option<String> {
    match e {
        VerifyError::Geometry(GeometryError::Constraint { constraint, .. }) => Some(constraint.clone()),
        VerifyError::Geometry(GeometryError::Jet(j)) | VerifyError::Jet(j) => Some(j.to_string()),
        VerifyError::Geometry(GeometryError::Quadrature(q)) => Some(q.to_string()),
        VerifyError::Geometry(GeometryError::Degenerate { .. }) => Some("nondegenerate metric".into()),
        VerifyError::Classify(ClassifyError::Geometry(g)) => is_constraint(&VerifyError::Geometry(g.clone())),
        VerifyError::Classify(ClassifyError::Jet(j)) => Some(j.to_string()),
        _ => None,
    }
}

/// Evaluate every per-point check at an accepted point.
pub fn evaluate_point(
    family: &Family,
    conv: &ConventionSet,
    cfg: &SuiteConfig,
    draw: usize,
    pt: &JetPoint,
) -> VerifyResult<PointRecord> {
    let tol = &cfg.tolerances;
    let lambda = family.lambda();
    let x = pt.coords[2];
    let wd = frame_curvature(family, pt)?.weyl_data(conv);
    let scale = wd.riemann_scale;
    let sd_expected = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), -x * x * x * 2.0, C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let sd_diff: Vec<C64> = wd.c.iter().zip(&sd_expected).map(|(a, b)| a - b).collect();
    // both Weyl halves come out of the same cancellations, so the larger of
    // them sets the attainable precision
    let weyl_scale = (2.0 * x.norm().powi(3)).max(max_norm(&wd.cdot)).max(scale);
    let sd_residual = max_norm(&sd_diff) / weyl_scale.max(1.0);

    let mut ambiguity = None;
    let mut classify = |cf: &[C64; 5], side: &str| -> VerifyResult<Option<PetrovType>> {
        match petrov_from_coefficients(cf, tol.classify) {
            Ok(p) => Ok(Some(p.kind)),
            Err(ClassifyError::Ambiguous { low, high }) => {
                ambiguity = Some(format!("{side}: {low} at half tolerance, {high} at double tolerance"));
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    };
    let sd_type = classify(&wd.c, "SD")?;
    let asd_type = classify(&wd.cdot, "ASD")?;

    let ed = family.ed_jets(pt, cfg.jet_order)?;
    let asd_table = ed.as_ref().map(|e| table1_type(e, tol.nonvanish));
    let reduced = ed.as_ref().map(|e| {
        let (r1, r2) = reduced_residuals(e);
        [r1.norm(), r2.norm()]
    });

    let (hh_residual, middle_triplet) = match family.key_function() {
        Some(key) => {
            let hh = key.hh_residual(pt)?.norm();
            let (a, q, b) = key.abqs(pt, 2)?;
            let mt = max_norm(&middle_triplet_residuals(&a, &q, &b, x, lambda));
            (Some(hh), Some(mt))
        }
        None => (None, None),
    };
    let abel = family.abel_residual(pt)?.map(|v| v.norm());
    let nullstring = max_norm(&nullstring_residuals(family, pt)?);

    let optics = if family.expectation().optics.is_some() {
        let ed_for_optics = if family.is_type_d() { ed.as_ref() } else { None };
        Some(congruence_optics(family, pt, ed_for_optics, tol.nonvanish)?.symbol())
    } else {
        None
    };

    let mut killing = Vec::new();
    let mut master = Vec::new();
    for g in family.generators() {
        killing.push(killing_residual(family, &g.vector, pt)?);
        master.push(match &ed {
            Some(e) => Some(max_norm(&master_residuals(e, &g.vector)?)),
            None => None,
        });
    }

    Ok(PointRecord {
        draw,
        chart: format!("{:?}", pt.chart),
        point: pt.coords,
        hyperheavenly: family.hyperheavenly(pt)?,
        riemann_scale: scale,
        einstein_scalar: rel((wd.r + lambda * 4.0).norm(), scale),
        traceless_ricci: rel(wd.cab_max, scale),
        sd_coefficients: wd.c,
        asd_coefficients: wd.cdot,
        sd_residual,
        asd_max: max_norm(&wd.cdot),
        sd_type,
        asd_type,
        asd_table,
        ambiguity,
        hh_residual,
        middle_triplet,
        reduced,
        abel,
        nullstring,
        optics,
        killing,
        master,
    })
}

/// Draw and evaluate points until `cfg.points` are accepted or the draw budget runs out.
pub fn sample_points(family: &Family, conv: &ConventionSet, cfg: &SuiteConfig) -> VerifyResult<(Vec<PointRecord>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let budget = DRAWS_PER_POINT * cfg.points;
    let nonvanish = if cfg.require_nonvanishing { cfg.tolerances.nonvanish } else { 0.0 };
    let chart = family.chart();
    let mut draws = 0;
    let mut records = Vec::new();
    let mut rejected: BTreeMap<String, usize> = BTreeMap::new();
    let mut reject = |msg: String| *rejected.entry(msg).or_insert(0) += 1;
    while records.len() < cfg.points && draws < budget {
        let mut batch = Vec::new();
        while batch.len() < cfg.points - records.len() && draws < budget {
            let coords = sample(&mut rng, &cfg.sample_box);
            let draw = draws;
            draws += 1;
            let pt = match JetPoint::new(chart, coords) {
                Ok(p) => p,
                Err(e) => {
                    reject(e.to_string());
                    continue;
                }
            };
            match family.check_point(&pt, nonvanish) {
                Ok(_) => batch.push((draw, pt)),
                Err(e) => reject(is_constraint(&e.into()).unwrap_or_else(|| "evaluation error".into())),
            }
        }
        let results: Vec<VerifyResult<PointRecord>> = batch
            .par_iter()
            .map(|(draw, pt)| evaluate_point(family, conv, cfg, *draw, pt))
            .collect();
        for r in results {
            match r {
                Ok(rec) => records.push(rec),
                Err(e) => match is_constraint(&e) {
                    Some(c) => reject(c),
                    None => return Err(e),
                },
            }
        }
    }
    if records.len() < cfg.points {
        let constraint = rejected
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| "none recorded".into());
        return Err(VerifyError::Sampling {
            family: family.id(),
            wanted: cfg.points,
            accepted: records.len(),
            draws,
            constraint,
        });
    }
    Ok((records, draws))
}

fn check(name: &str, values: impl IntoIterator<Item = f64>, tolerance: f64) -> Check {
    let mut worst: f64 = 0.0;
    let mut nan = false;
    for v in values {
        nan |= v.is_nan();
        worst = worst.max(v);
    }
    Check {
        name: name.to_string(),
        worst: if nan { f64::NAN } else { worst },
        tolerance,
        passed: !nan && worst <= tolerance,
    }
}

fn label_check(name: &str, expected: &str, observed: impl IntoIterator<Item = String>) -> LabelCheck {
    let observed: Vec<String> = observed.into_iter().collect();
    let mismatches = observed.iter().filter(|o| *o != expected).count();
    let mut distinct = observed.clone();
    distinct.sort();
    distinct.dedup();
    LabelCheck {
        name: name.to_string(),
        expected: expected.to_string(),
        mismatches,
        observed: distinct,
        passed: mismatches == 0,
    }
}

fn type_label(t: Option<PetrovType>) -> String {
    t.map_or_else(|| "AMBIGUOUS".into(), |t| t.to_string())
}

fn symmetry_section(family: &Family, records: &[PointRecord], tol: &Tolerances) -> SymmetryReport {
    let lambda = family.lambda();
    let generators: Vec<GeneratorReport> = family
        .generators()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let chi0 = g.vector.chi0;
            let master: Vec<f64> = records.iter().filter_map(|r| r.master[k]).collect();
            GeneratorReport {
                name: g.name.clone(),
                vector: g.vector.describe(),
                chi0,
                killing_max: records.iter().map(|r| r.killing[k]).fold(0.0, f64::max),
                master_max: (!master.is_empty()).then(|| master.iter().copied().fold(0.0, f64::max)),
                proper_homothety: (chi0.norm() > 0.0).then(|| g.vector.validate(lambda).is_ok()),
            }
        })
        .collect();
    let vectors: Vec<_> = family.generators().iter().map(|g| g.vector.clone()).collect();
    let points: Vec<[C64; 4]> = records.iter().map(|r| r.hyperheavenly).collect();
    let expected = family.expectation().algebra.clone();
    let (cst, fit, algebra, error) = match structure_constants(&vectors, &points) {
        Ok((cst, fit)) => match algebra_identify(&cst, 1e-7) {
            Ok(name) => (Some(cst), Some(fit), Some(name), None),
            Err(e) => (Some(cst), Some(fit), None, Some(e.to_string())),
        },
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    let killing_ok = generators
        .iter()
        .all(|g| g.killing_max <= tol.killing && g.master_max.is_none_or(|m| m <= tol.killing));
    let homothety_ok = generators.iter().all(|g| g.proper_homothety != Some(false));
    let algebra_ok = match (&expected, &algebra) {
        (Some(e), Some(a)) => e.matches(a),
        (None, _) => error.is_none(),
        (Some(_), None) => false,
    };
    SymmetryReport {
        generators,
        structure_constants: cst,
        fit_residual: fit,
        algebra,
        expected,
        error,
        passed: killing_ok && homothety_ok && algebra_ok,
    }
}

/// Run one verification suite.
pub fn run_suite(cfg: &SuiteConfig, conv: &ConventionSet) -> VerifyResult<VerificationReport> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let (records, draws) = sample_points(&family, conv, cfg)?;
    let tol = &cfg.tolerances;
    let exp = family.expectation().clone();

    let opt = |f: fn(&PointRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
    let mut checks = vec![
        check("einstein: |R + 4Λ|", records.iter().map(|r| r.einstein_scalar), tol.einstein),
        check("einstein: traceless Ricci", records.iter().map(|r| r.traceless_ricci), tol.einstein),
        check("self-dual coefficients", records.iter().map(|r| r.sd_residual), tol.self_dual),
        check("null strings", records.iter().map(|r| r.nullstring), tol.structural),
    ];
    let hh = opt(|r| r.hh_residual);
    if !hh.is_empty() {
        checks.push(check("hyperheavenly equation", hh, tol.structural));
        checks.push(check("middle triplet", opt(|r| r.middle_triplet), tol.structural));
    }
    let reduced: Vec<f64> = records.iter().filter_map(|r| r.reduced).flatten().collect();
    if !reduced.is_empty() {
        checks.push(check("reduced field equations", reduced, tol.reduced));
    }
    let abel = opt(|r| r.abel);
    if !abel.is_empty() {
        checks.push(check("Abel equation", abel, tol.reduced));
    }

    let mut labels = vec![label_check("SD type", "D", records.iter().map(|r| type_label(r.sd_type)))];
    let nonexistence = cfg.claim == ClaimMode::Nonexistence;
    if nonexistence {
        checks.push(check("ASD coefficients vanish", records.iter().map(|r| r.asd_max), tol.nonexistence));
    } else {
        if let Some(asd) = exp.asd {
            let want = asd.to_string();
            labels.push(label_check("ASD type", &want, records.iter().map(|r| type_label(r.asd_type))));
            if records.iter().any(|r| r.asd_table.is_some()) {
                labels.push(label_check(
                    "ASD type (decision tree)",
                    &want,
                    records.iter().map(|r| type_label(r.asd_table)),
                ));
            }
        }
        if let Some(optics) = &exp.optics {
            labels.push(label_check(
                "optics",
                optics,
                records.iter().map(|r| r.optics.clone().unwrap_or_default()),
            ));
        }
    }
    let symmetry = symmetry_section(&family, &records, tol);

    let residuals_ok = checks.iter().all(|c| c.passed);
    let ambiguous = records.iter().any(|r| r.ambiguity.is_some());
    let labels_ok = labels.iter().all(|l| l.passed);
    let verdict = if !residuals_ok {
        Verdict::Fail
    } else if ambiguous && !nonexistence {
        Verdict::Ambiguous
    } else if !labels_ok || !symmetry.passed {
        Verdict::Fail
    } else if nonexistence {
        Verdict::Nonexistent
    } else {
        Verdict::Pass
    };

    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        family: family.id(),
        claim: cfg.label.clone().unwrap_or(exp.claim),
        claim_mode: cfg.claim,
        params: family.spec().params.clone(),
        seed: cfg.seed,
        points_requested: cfg.points,
        draws,
        jet_order: cfg.jet_order,
        require_nonvanishing: cfg.require_nonvanishing,
        sample_box: cfg.sample_box,
        tolerances: cfg.tolerances,
        calibration: conv.to_string(),
        calibration_fingerprint: conv.fingerprint(),
        records,
        checks,
        labels,
        symmetry,
        verdict,
    })
}

/// The catalog rows run by [`run_all`]: one per solution type plus the nonexistence row.
pub fn catalog(seed: u64) -> Vec<SuiteConfig> {
    let mut out: Vec<SuiteConfig> = [
        FamilyId::TypeIIpppp,
        FamilyId::TypeIIppmm,
        FamilyId::TypeDpppp,
        FamilyId::TypeDppmm,
        FamilyId::TypeIIIpppp,
        FamilyId::TypeIIIppmm,
        FamilyId::TypeNpppp,
        FamilyId::TypeN2d,
    ]
    .into_iter()
    .map(|id| {
        let mut cfg = SuiteConfig::new(FamilySpec::new(id));
        cfg.seed = seed;
        cfg
    })
    .collect();
    let mut none = SuiteConfig::new(FamilySpec::new(FamilyId::EdGeneric));
    none.seed = seed;
    none.claim = ClaimMode::Nonexistence;
    none.label = Some("[N]^n with D_z = 0, E_zzz = 0, Λ = 0: does not exist".into());
    out.push(none);
    out
}

/// Run every catalog row with default parameters.
pub fn run_all(seed: u64, conv: &ConventionSet) -> VerifyResult<Vec<VerificationReport>> {
    catalog(seed).iter().map(|cfg| run_suite(cfg, conv)).collect()
}
