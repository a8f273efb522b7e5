//! Petrov-Penrose types from Weyl coefficients and from the (E, D) criteria,
//! congruence optics, null-string residuals, and symmetry checks.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix4, Schur};
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};
use crate::families::{deriv_on, EdJets, WalkerField};
use crate::geometry::{inverse_value, GeometryError};
use crate::jets::{lift, lift_all, Jet, JetError, JetPoint};

type C64 = Complex64;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("ambiguous classification: type {low} at half tolerance, {high} at double tolerance")]
    Ambiguous { low: PetrovType, high: PetrovType },
    #[error("root finding failed for {0}")]
    RootFinding(String),
    #[error("generators do not close into an algebra (worst fit residual {residual:.3e})")]
    NotAnAlgebra { residual: f64 },
    #[error("generators are linearly dependent at the sample points")]
    DependentGenerators,
    #[error("Λχ₀ = {0} but a proper homothety requires Λ = 0")]
    HomothetyWithLambda(C64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub type ClassifyResult<T> = Result<T, ClassifyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PetrovType {
    I,
    II,
    D,
    III,
    N,
    O,
}

impl PetrovType {
    pub fn partition(&self) -> &'static [usize] {
        match self {
            PetrovType::I => &[1, 1, 1, 1],
            PetrovType::II => &[2, 1, 1],
            PetrovType::D => &[2, 2],
            PetrovType::III => &[3, 1],
            PetrovType::N => &[4],
            PetrovType::O => &[],
        }
    }
}

impl fmt::Display for PetrovType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PetrovType::I => "I",
            PetrovType::II => "II",
            PetrovType::D => "D",
            PetrovType::III => "III",
            PetrovType::N => "N",
            PetrovType::O => "O",
        };
        f.write_str(s)
    }
}

/// Type plus the supporting root data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PetrovClass {
    pub kind: PetrovType,
    pub partition: Vec<usize>,
    /// Roots ζ of the quartic; a root at infinity is reported as `None`.
    pub roots: Vec<Option<C64>>,
}

/// Fixed Möbius rotations tried in turn, so no root sits at infinity.
const ROTATIONS: [(f64, f64, f64, f64); 4] = [
    (0.3, 0.7, -0.45, 0.2),
    (-0.6, 0.25, 0.35, -0.55),
    (0.8, -0.3, 0.15, 0.65),
    (0.1, 0.9, -0.75, -0.4),
];

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![c(0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(a: &[C64], k: usize) -> Vec<C64> {
    (0..k).fold(vec![c(1.0)], |acc, _| poly_mul(&acc, a))
}

fn poly_eval(p: &[C64], z: C64) -> C64 {
    p.iter().rev().fold(c(0.0), |acc, a| acc * z + a)
}

fn poly_scale(p: &[C64], z: C64) -> f64 {
    let r = z.norm();
    p.iter().enumerate().map(|(k, a)| a.norm() * r.powi(k as i32)).sum()
}

fn poly_deriv(p: &[C64]) -> Vec<C64> {
    p.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect()
}

/// Roots of a polynomial with nonzero leading coefficient (ascending coefficients).
pub fn poly_roots(p: &[C64]) -> ClassifyResult<Vec<C64>> {
    let n = p.len() - 1;
    match n {
        0 => Ok(vec![]),
        1 => Ok(vec![-p[0] / p[1]]),
        2 => {
            let (a, b, cc) = (p[2], p[1], p[0]);
            let disc = (b * b - a * cc * 4.0).sqrt();
            // avoid cancellation
            let s = if (b.conj() * disc).re >= 0.0 { -(b + disc) } else { -(b - disc) } / 2.0;
            if s.norm() == 0.0 {
                return Ok(vec![c(0.0), c(0.0)]);
            }
            Ok(vec![s / a, cc / s])
        }
        _ => {
            let lead = p[n];
            let m = DMatrix::<C64>::from_fn(n, n, |i, j| {
                if i == 0 {
                    -p[n - 1 - j] / lead
                } else if i == j + 1 {
                    c(1.0)
                } else {
                    c(0.0)
                }
            });
            let schur = Schur::try_new(m, 1e-15, 10_000)
                .ok_or_else(|| ClassifyError::RootFinding(format!("degree-{n} polynomial")))?;
            let ev = schur
                .eigenvalues()
                .ok_or_else(|| ClassifyError::RootFinding(format!("degree-{n} polynomial")))?;
            Ok(ev.iter().copied().collect())
        }
    }
}

/// Quartic `c1ζ⁴ + 4c2ζ³ + 6c3ζ² + 4c4ζ + c5` after a rotation, normalized.
fn rotated_quartic(cf: &[C64; 5]) -> (Vec<C64>, (C64, C64)) {
    // homogeneous weights h_k of ζ^k η^{4−k}
    let h = [cf[4], cf[3] * 4.0, cf[2] * 6.0, cf[1] * 4.0, cf[0]];
    let mut best: Option<(f64, Vec<C64>, (C64, C64))> = None;
    for &(br, bi, gr, gi) in &ROTATIONS {
        let (beta, gamma) = (C64::new(br, bi), C64::new(gr, gi));
        // ζ = ζ' + β, η = γζ' + 1
        let zeta = [beta, c(1.0)];
        let eta = [c(1.0), gamma];
        let mut p = [c(0.0); 5];
        for (k, hk) in h.iter().enumerate() {
            let term = poly_mul(&poly_pow(&zeta, k), &poly_pow(&eta, 4 - k));
            for (i, t) in term.iter().enumerate() {
                p[i] += hk * t;
            }
        }
        let scale = p.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let lead = p[4].norm() / scale;
        if best.as_ref().is_none_or(|b| lead > b.0) {
            best = Some((lead, p.iter().map(|v| v / scale).collect(), (beta, gamma)));
        }
        if lead > 1e-2 {
            break;
        }
    }
    let (_, p, rot) = best.expect("rotation list is not empty");
    (p, rot)
}

fn is_multiple(p: &[C64], r: C64, m: usize, tol: f64) -> bool {
    let mut d = p.to_vec();
    for _ in 0..m - 1 {
        if poly_eval(&d, r).norm() > tol * poly_scale(&d, r) {
            return false;
        }
        d = poly_deriv(&d);
    }
    true
}

fn classify_at(p: &[C64], tol: f64) -> ClassifyResult<PetrovType> {
    for m in [4usize, 3] {
        let mut d = p.to_vec();
        for _ in 0..m - 1 {
            d = poly_deriv(&d);
        }
        if poly_roots(&d)?.into_iter().any(|r| is_multiple(p, r, m, tol)) {
            return Ok(if m == 4 { PetrovType::N } else { PetrovType::III });
        }
    }
    let mut doubles: Vec<C64> = Vec::new();
    for r in poly_roots(&poly_deriv(p))? {
        if is_multiple(p, r, 2, tol) && doubles.iter().all(|s| (s - r).norm() > tol.sqrt() * (1.0 + r.norm())) {
            doubles.push(r);
        }
    }
    Ok(match doubles.len() {
        0 => PetrovType::I,
        1 => PetrovType::II,
        _ => PetrovType::D,
    })
}

/// Type of the quartic `c1ζ⁴ + 4c2ζ³ + 6c3ζ² + 4c4ζ + c5`.
///
/// Multiplicities are read off from common roots of the quartic and its
/// derivatives, with residuals measured relative to the size of the terms.
/// The result must agree at `tol/2` and `2·tol`, otherwise the call reports
/// an ambiguity.
pub fn petrov_from_coefficients(cf: &[C64; 5], tol: f64) -> ClassifyResult<PetrovClass> {
    if !(tol > 0.0) {
        return Err(ClassifyError::Tolerance(tol));
    }
    if cf.iter().all(|v| v.norm() < tol) {
        return Ok(PetrovClass {
            kind: PetrovType::O,
            partition: vec![],
            roots: vec![],
        });
    }
    let (p, (beta, gamma)) = rotated_quartic(cf);
    let low = classify_at(&p, tol / 2.0)?;
    let high = classify_at(&p, tol * 2.0)?;
    if low != high {
        return Err(ClassifyError::Ambiguous { low, high });
    }
    let roots = poly_roots(&p)?
        .into_iter()
        .map(|r| {
            let den = gamma * r + 1.0;
            if den.norm() < 1e-12 * (1.0 + r.norm()) {
                None
            } else {
                Some((r + beta) / den)
            }
        })
        .collect();
    Ok(PetrovClass {
        kind: low,
        partition: low.partition().to_vec(),
        roots,
    })
}

/// Decision tree on E and D_z derivatives, with absolute threshold `thr`.
pub fn table1_type(ed: &EdJets, thr: f64) -> PetrovType {
    let l = ed.lambda;
    let e3 = ed.e(0, 3);
    let e4 = ed.e(0, 4);
    let d4 = ed.dz(0, 3);
    if l.norm() > thr {
        if e4.norm() > thr || (l * d4 * 2.0 - e3 * e3).norm() > thr {
            PetrovType::II
        } else {
            PetrovType::D
        }
    } else if e3.norm() > thr {
        PetrovType::III
    } else if d4.norm() > thr {
        PetrovType::N
    } else {
        PetrovType::O
    }
}

/// First partials of a native jet expressed in hyperheavenly (q, p, x, y)
/// coordinates, given the jet `y` of y in the native chart.
fn y_chart_partials(f: &Jet, y: &Jet) -> [C64; 4] {
    let fy = f.d(3) / y.d(3);
    [f.d(0) - y.d(0) * fy, f.d(1) - y.d(1) * fy, f.d(2) - y.d(2) * fy, fy]
}

/// `(r_a, r_b, M1, M2)` for the nonexpanding congruence `z = −y/x`.
pub fn nullstring_residuals(field: &dyn WalkerField, pt: &JetPoint) -> ClassifyResult<[C64; 4]> {
    let wj = field.walker(pt, 1)?;
    let x = lift(pt, 2, 1)?;
    let y = wj.y.truncate(1);
    let z = -(y.div(&x)?);
    let zz = &wj.b + &z * &wj.q * 2.0 + &z * &z * &wj.a;
    let qa = &wj.q + &z * &wj.a;
    let [zq, zp, zx, zy] = y_chart_partials(&z, &y);
    let [_, _, zzx, zzy] = y_chart_partials(&zz, &y);
    let [_, _, qax, qay] = y_chart_partials(&qa, &y);
    let (z0, xv) = (z.value(), x.value());
    let ra = zx - z0 * zy;
    let rb = zq - z0 * zp - zy * zz.value() + z0 * zzy - zzx;
    let m1 = -xv * zy - 1.0;
    let m2 = -xv * zp + xv * z0 * qay - xv * qax + (c(1.0) - xv * zy) * qa.value();
    Ok([ra, rb, m1, m2])
}

/// Expansion and twist representatives with their labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongruenceReport {
    pub theta1: C64,
    pub rho1: C64,
    pub theta3: C64,
    pub rho3: C64,
    pub labels: Vec<String>,
}

impl CongruenceReport {
    /// Labels as a symbol such as `[++,−−]`.
    pub fn symbol(&self) -> String {
        format!("[{}]", self.labels.join(","))
    }
}

fn label(theta: C64, rho: C64, thr: f64) -> String {
    let s = |v: C64| if v.norm() > thr { "+" } else { "\u{2212}" };
    format!("{}{}", s(theta), s(rho))
}

/// Optics of the congruences. `I₁` uses `θ = xz_y + 2`, `ϱ = z_y`; `I₃` uses
/// `x⁻²(Q + zA)`, proportional to D_z. With `ed` given (type-D families) the
/// labels also include `I₂` (from `a = E_zzz/6`) and `I₄` (from μ₀ = 1).
pub fn congruence_optics(field: &dyn WalkerField, pt: &JetPoint, ed: Option<&EdJets>, thr: f64) -> ClassifyResult<CongruenceReport> {
    let wj = field.walker(pt, 1)?;
    let x = lift(pt, 2, 1)?;
    let y = wj.y.truncate(1);
    let z = -(y.div(&x)?);
    let zy = y_chart_partials(&z, &y)[3];
    let xv = x.value();
    let theta1 = xv * zy + 2.0;
    let rho1 = zy;
    let theta3 = (wj.q.value() + z.value() * wj.a.value()) / (xv * xv);
    let rho3 = theta3;
    let mut labels = vec![label(theta1, rho1, thr), label(theta3, rho3, thr)];
    if let Some(ed) = ed {
        let a = ed.e(0, 3) / 6.0;
        labels.insert(1, label(a, a, thr));
        labels.push(label(c(1.0), c(1.0), thr));
    }
    Ok(CongruenceReport {
        theta1,
        rho1,
        theta3,
        rho3,
        labels,
    })
}

/// `K = ã∂_q + c̃∂_p + (c̃_q x − ã_q y − ε̃)∂_y + (2/3)χ₀(2p∂_p − x∂_x + y∂_y)`.
#[derive(Debug, Clone)]
pub struct SymmetryVector {
    pub a: Expr,
    pub c: Expr,
    pub eps: Expr,
    pub alpha: Expr,
    pub chi0: C64,
}

impl SymmetryVector {
    /// Coefficient functions of q as expressions; α̃ defaults to 0.
    pub fn new(a: &str, cc: &str, eps: &str, chi0: C64) -> Result<SymmetryVector, ExprError> {
        Ok(SymmetryVector {
            a: expr::parse_in(a, "q")?,
            c: expr::parse_in(cc, "q")?,
            eps: expr::parse_in(eps, "q")?,
            alpha: expr::parse_in("0", "q")?,
            chi0,
        })
    }

    pub fn validate(&self, lambda: C64) -> ClassifyResult<()> {
        let v = lambda * self.chi0;
        if v.norm() > 1e-12 {
            return Err(ClassifyError::HomothetyWithLambda(v));
        }
        Ok(())
    }

    /// Components (K^q, K^p, K^x, K^y) on jets of the hyperheavenly coordinates.
    pub fn components(&self, q: &Jet, p: &Jet, x: &Jet, y: &Jet) -> Result<[Jet; 4], JetError> {
        let k = self.chi0 * (2.0 / 3.0);
        let a = self.a.eval_on(q)?;
        let aq = deriv_on(&self.a, q, 1)?;
        let cc = self.c.eval_on(q)?;
        let cq = deriv_on(&self.c, q, 1)?;
        let eps = self.eps.eval_on(q)?;
        Ok([
            a,
            cc + p * (k * 2.0),
            x * -k,
            cq * x - aq * y - eps + y * k,
        ])
    }

    pub fn describe(&self) -> String {
        format!(
            "a(q) = {}, c(q) = {}, eps(q) = {}, chi0 = {}",
            self.a, self.c, self.eps, self.chi0
        )
    }
}

/// Largest frame component of `∇_(a K_b) − χ₀ g_ab`.
pub fn killing_residual(field: &dyn WalkerField, k: &SymmetryVector, pt: &JetPoint) -> ClassifyResult<f64> {
    let wj = field.walker(pt, 1)?;
    let tetrad = wj.tetrad(&lift(pt, 2, 1)?)?;
    let g = tetrad.metric();
    let [q, p, x, _] = lift_all(pt, 1)?;
    let y = wj.y.truncate(1);
    let [kq, kp, kx, ky] = k.components(&q, &p, &x, &y)?;
    // native component along the fourth coordinate
    let yd: [Jet; 4] = std::array::from_fn(|i| wj.y.diff(i));
    let kxi = (ky - &yd[0] * &kq - &yd[1] * &kp - &yd[2] * &kx).div(&yd[3])?;
    let kv = [kq, kp, kx, kxi];
    let mut r = Matrix4::<C64>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let mut lie = c(0.0);
            for cc in 0..4 {
                lie += kv[cc].value() * g[a][b].d(cc) + g[cc][b].value() * kv[cc].d(a) + g[a][cc].value() * kv[cc].d(b);
            }
            r[(a, b)] = lie * 0.5 - k.chi0 * g[a][b].value();
        }
    }
    let frame = inverse_value(&tetrad.values())?;
    let rf = frame.transpose() * r * frame;
    Ok(rf.iter().map(|v| v.norm()).fold(0.0, f64::max))
}

/// Residuals of the five reduced symmetry equations at the (E, D) level.
///
/// The first is differentiated once in z, since only D_z is available; it is
/// then free of the additive function α̃, which enters the last equation.
pub fn master_residuals(ed: &EdJets, k: &SymmetryVector) -> ClassifyResult<[C64; 5]> {
    let at = |e: &Expr| expr::eval_jet(e, ed.q, 3);
    let (a, cc, eps, alpha) = (at(&k.a)?, at(&k.c)?, at(&k.eps)?, at(&k.alpha)?);
    let d = |j: &Jet, n: u8| j.partial(&[n]);
    let (z, chi) = (ed.z, k.chi0);
    let l = ed.lambda;
    let r1 = -d(&a, 0) * ed.dz(1, 0)
        + (d(&a, 1) * z - chi * z * (4.0 / 3.0) + d(&cc, 1)) * ed.dz(0, 1)
        + (chi * (2.0 / 3.0) - d(&a, 1)) * ed.dz(0, 0)
        + d(&eps, 0) * 0.5;
    let r2 = -d(&a, 0) * ed.e(1, 0) * 0.5
        + (-chi * z * (2.0 / 3.0) + d(&a, 1) * z * 0.5 + d(&cc, 1) * 0.5) * ed.e(0, 1)
        + (chi * (2.0 / 3.0) - d(&a, 1)) * ed.e(0, 0)
        - d(&eps, 0) * ed.dz(0, 0)
        + (d(&a, 2) * z + d(&cc, 2)) * 0.5;
    let r3 = d(&eps, 0) * ed.e(0, 1) + d(&eps, 1);
    let r4 = l * d(&eps, 0);
    let r5 = d(&a, 3) - l * d(&alpha, 0) * 2.0;
    Ok([r1, r2, r3, r4, r5])
}

/// Lie algebra names used in the catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraName {
    A1,
    TwoA1,
    A21,
    A21PlusA1,
    A32,
    A34,
    /// `A_{3,5}^α`, with α normalized to |α| ≤ 1 (α and 1/α name the same algebra).
    A35(f64),
    A38,
    A38PlusA1,
    A48,
    Unknown(String),
}

impl AlgebraName {
    /// Equality up to the α ↔ 1/α ambiguity of `A_{3,5}^α`.
    pub fn matches(&self, other: &AlgebraName) -> bool {
        match (self, other) {
            (AlgebraName::A35(a), AlgebraName::A35(b)) => {
                (a - b).abs() < 1e-6 || (a * b - 1.0).abs() < 1e-6
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for AlgebraName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraName::A1 => f.write_str("A1"),
            AlgebraName::TwoA1 => f.write_str("2A1"),
            AlgebraName::A21 => f.write_str("A2,1"),
            AlgebraName::A21PlusA1 => f.write_str("A2,1\u{2295}A1"),
            AlgebraName::A32 => f.write_str("A3,2"),
            AlgebraName::A34 => f.write_str("A3,4"),
            AlgebraName::A35(a) => write!(f, "A3,5^{}", (a * 1e9).round() / 1e9),
            AlgebraName::A38 => f.write_str("A3,8"),
            AlgebraName::A38PlusA1 => f.write_str("A3,8\u{2295}A1"),
            AlgebraName::A48 => f.write_str("A4,8"),
            AlgebraName::Unknown(s) => write!(f, "unknown ({s})"),
        }
    }
}

impl Serialize for AlgebraName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `[K_i, K_j] = Σ_k C[i][j][k] K_k`.
pub type StructureConstants = Vec<Vec<Vec<C64>>>;

fn bracket_at(x: &SymmetryVector, y: &SymmetryVector, pt: &JetPoint) -> ClassifyResult<([C64; 4], [C64; 4], [C64; 4])> {
    let [q, p, xx, yy] = lift_all(pt, 1)?;
    let kx = x.components(&q, &p, &xx, &yy)?;
    let ky = y.components(&q, &p, &xx, &yy)?;
    let out = std::array::from_fn(|a| {
        (0..4)
            .map(|b| kx[b].value() * ky[a].d(b) - ky[b].value() * kx[a].d(b))
            .sum()
    });
    Ok((kx.map(|j| j.value()), ky.map(|j| j.value()), out))
}

/// Structure constants by least squares over sample points given in (q, p, x, y),
/// with the worst relative fit residual.
pub fn structure_constants(gens: &[SymmetryVector], points: &[[C64; 4]]) -> ClassifyResult<(StructureConstants, f64)> {
    let n = gens.len();
    let pts: Vec<JetPoint> = points
        .iter()
        .map(|v| JetPoint::new(crate::jets::Chart::Y, *v))
        .collect::<Result<_, _>>()?;
    let rows = 4 * pts.len();
    let mut basis = DMatrix::<C64>::zeros(rows, n);
    for (ip, pt) in pts.iter().enumerate() {
        let [q, p, x, y] = lift_all(pt, 1)?;
        for (k, g) in gens.iter().enumerate() {
            let comps = g.components(&q, &p, &x, &y)?;
            for a in 0..4 {
                basis[(4 * ip + a, k)] = comps[a].value();
            }
        }
    }
    let svd = basis.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if n > 0 && svd.singular_values.min() <= 1e-8 * smax.max(1e-300) {
        return Err(ClassifyError::DependentGenerators);
    }
    let mut cst = vec![vec![vec![c(0.0); n]; n]; n];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut rhs = DVector::<C64>::zeros(rows);
            for (ip, pt) in pts.iter().enumerate() {
                let (_, _, br) = bracket_at(&gens[i], &gens[j], pt)?;
                for a in 0..4 {
                    rhs[4 * ip + a] = br[a];
                }
            }
            let sol = svd
                .solve(&rhs, 1e-14 * smax)
                .map_err(|e| ClassifyError::RootFinding(e.to_string()))?;
            let res = (&basis * &sol - &rhs).norm() / rhs.norm().max(1.0);
            worst = worst.max(res);
            for k in 0..n {
                cst[i][j][k] = sol[k];
                cst[j][i][k] = -sol[k];
            }
        }
    }
    if worst > 1e-8 {
        return Err(ClassifyError::NotAnAlgebra { residual: worst });
    }
    Ok((cst, worst))
}

fn bracket(cst: &StructureConstants, u: &DVector<C64>, v: &DVector<C64>) -> DVector<C64> {
    let n = u.len();
    let mut out = DVector::<C64>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let w = u[i] * v[j];
            if w.norm() == 0.0 {
                continue;
            }
            for k in 0..n {
                out[k] += w * cst[i][j][k];
            }
        }
    }
    out
}

/// Orthonormal basis of the span of `vs` (columns), by SVD.
fn span(vs: &[DVector<C64>], n: usize, tol: f64) -> DMatrix<C64> {
    if vs.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let m = DMatrix::from_columns(vs);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])])
}

fn unit(n: usize, k: usize) -> DVector<C64> {
    DVector::from_fn(n, |i, _| if i == k { c(1.0) } else { c(0.0) })
}

/// Eigenvalues of a small square matrix.
fn eigenvalues(m: &DMatrix<C64>) -> ClassifyResult<Vec<C64>> {
    let n = m.nrows();
    // characteristic polynomial through the companion route is unstable for
    // repeated eigenvalues; use the Schur form directly
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| ClassifyError::RootFinding(format!("{n}x{n} matrix")))?;
    Ok(schur
        .eigenvalues()
        .ok_or_else(|| ClassifyError::RootFinding(format!("{n}x{n} matrix")))?
        .iter()
        .copied()
        .collect())
}

/// Name of the algebra with the given structure constants.
pub fn algebra_identify(cst: &StructureConstants, tol: f64) -> ClassifyResult<AlgebraName> {
    let n = cst.len();
    let basis: Vec<DVector<C64>> = (0..n).map(|k| unit(n, k)).collect();
    let mut brackets = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            brackets.push(bracket(cst, &basis[i], &basis[j]));
        }
    }
    let derived = span(&brackets, n, tol);
    let d1 = derived.ncols();
    let dcols: Vec<DVector<C64>> = derived.column_iter().map(|c| c.into_owned()).collect();
    let mut second = Vec::new();
    for i in 0..d1 {
        for j in (i + 1)..d1 {
            second.push(bracket(cst, &dcols[i], &dcols[j]));
        }
    }
    let d2 = span(&second, n, tol).ncols();
    // center: x with [x, e_j] = 0 for all j
    let center_dim = if n == 0 {
        0
    } else {
        let m = DMatrix::<C64>::from_fn(n * n, n, |r, i| cst[i][r / n][r % n]);
        let sv = m.svd(false, false).singular_values;
        n - sv.iter().filter(|s| **s > tol).count()
    };
    let unknown = |what: &str| AlgebraName::Unknown(format!("dim {n}, derived {d1}, {what}"));
    // ad of a complement vector on the derived ideal: [d_j, X] = Σ_i M_ij d_i
    let ad_on_derived = || -> Option<DMatrix<C64>> {
        let proj = &derived * derived.adjoint();
        let x = (0..n)
            .map(|k| &basis[k] - &proj * &basis[k])
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
        let x = &x / C64::new(x.norm(), 0.0);
        let m = DMatrix::from_fn(d1, d1, |i, j| (derived.column(i).adjoint() * bracket(cst, &dcols[j], &x))[(0, 0)]);
        Some(m)
    };
    Ok(match n {
        0 => unknown("empty"),
        1 => AlgebraName::A1,
        2 if d1 == 0 => AlgebraName::TwoA1,
        2 => AlgebraName::A21,
        3 => match d1 {
            0 => unknown("abelian"),
            1 => {
                let central = (0..n).all(|j| bracket(cst, &dcols[0], &basis[j]).norm() <= tol);
                if center_dim == 1 && !central {
                    AlgebraName::A21PlusA1
                } else {
                    unknown("Heisenberg")
                }
            }
            2 if d2 == 0 => {
                let Some(m) = ad_on_derived() else { return Ok(unknown("no complement")) };
                let ev = eigenvalues(&m)?;
                let (l1, l2) = if ev[0].norm() >= ev[1].norm() { (ev[0], ev[1]) } else { (ev[1], ev[0]) };
                if l1.norm() <= tol {
                    unknown("nilpotent action")
                } else if (l1 - l2).norm() <= 1e-6 * l1.norm() {
                    let shifted = &m - DMatrix::<C64>::identity(2, 2) * l1;
                    if shifted.norm() <= 1e-6 * l1.norm() {
                        unknown("scalar action")
                    } else {
                        AlgebraName::A32
                    }
                } else {
                    let ratio = l2 / l1;
                    if (ratio + 1.0).norm() <= 1e-6 {
                        AlgebraName::A34
                    } else if ratio.im.abs() <= 1e-9 {
                        AlgebraName::A35(ratio.re)
                    } else {
                        unknown(&format!("eigenvalue ratio {ratio}"))
                    }
                }
            }
            3 => AlgebraName::A38,
            _ => unknown("unclassified"),
        },
        4 if d1 == 3 && center_dim == 1 && d2 == 3 => AlgebraName::A38PlusA1,
        4 if d1 == 3 && center_dim == 1 && d2 == 1 => {
            let Some(m) = ad_on_derived() else { return Ok(unknown("no complement")) };
            let mut ev = eigenvalues(&m)?;
            ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            let scale = ev[2].norm().max(1e-300);
            if ev[0].norm() <= 1e-6 * scale && (ev[1] + ev[2]).norm() <= 1e-6 * scale {
                AlgebraName::A48
            } else {
                unknown(&format!("ad eigenvalues {:?}", ev))
            }
        }
        _ => unknown("unclassified"),
    })
}
