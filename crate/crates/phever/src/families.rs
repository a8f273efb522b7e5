//! Catalog of metric families: generic key-function spaces, the (E, D)
//! reduced family and the explicit solutions of each Petrov-Penrose type,
//! plus gauge transformations and field-equation residuals.
//!
//! Each family lives in one native chart:
//! - y-chart `(q, p, x, y)` for key-function families,
//! - z-chart `(q, p, x, z)` with `y = −xz` for (E, D) families,
//! - w-chart `(q, p, x, w)` with `y = −xZ(q, w)` for integral profiles.
//!
//! The null coframe is the same one-form field in every chart, so all charts
//! share one set of curvature conventions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{AlgebraName, PetrovType, SymmetryVector};
use crate::expr::{self, Expr, ExprError};
use crate::geometry::{abq_from_key, GeoResult, GeometryError, MetricField, Tetrad, WalkerJets};
use crate::jets::{lift_all, Chart, Jet, JetError, JetPoint};
use crate::quadrature::{integrate, Base, IntegralProfile};

type C64 = Complex64;

/// Minimum magnitude of any family denominator at an accepted point.
pub const DENOMINATOR_GUARD: f64 = 0.1;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("unknown family `{0}` (see list-families)")]
    UnknownFamily(String),
    #[error("family {family} has no parameter `{name}`")]
    UnknownParameter { family: FamilyId, name: String },
    #[error("parameter `{name}`: {source}")]
    Parameter { name: String, source: ExprError },
    #[error("parameter `{name}` must be {what}")]
    Invalid { name: String, what: String },
    #[error("gauge restriction: {0}")]
    GaugeRestriction(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "generic-w")]
    GenericW,
    #[serde(rename = "ed-generic")]
    EdGeneric,
    #[serde(rename = "type-ii-pppp")]
    TypeIIpppp,
    #[serde(rename = "type-ii-ppmm")]
    TypeIIppmm,
    #[serde(rename = "type-d-pppp")]
    TypeDpppp,
    #[serde(rename = "type-d-ppmm")]
    TypeDppmm,
    #[serde(rename = "type-iii-pppp")]
    TypeIIIpppp,
    #[serde(rename = "type-iii-pppp-sym")]
    TypeIIIppppSym,
    #[serde(rename = "type-iii-ppmm")]
    TypeIIIppmm,
    #[serde(rename = "type-iii-ppmm-sym")]
    TypeIIIppmmSym,
    #[serde(rename = "type-n-pppp")]
    TypeNpppp,
    #[serde(rename = "type-n-2d")]
    TypeN2d,
    #[serde(rename = "type-n-3d")]
    TypeN3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Constant,
    /// Expression in the listed variables.
    Function(&'static [&'static str]),
    /// Base point of a profile integral: `inf`, `0` or a complex constant.
    Base,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
}

const fn constant(name: &'static str, default: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Constant,
        default,
    }
}

const fn function(name: &'static str, vars: &'static [&'static str], default: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Function(vars),
        default,
    }
}

const fn base(default: &'static str) -> ParamSpec {
    ParamSpec {
        name: "w0",
        kind: ParamKind::Base,
        default,
    }
}

macro_rules! params {
    ($($p:expr),* $(,)?) => {{
        const P: &[ParamSpec] = &[$($p),*];
        P
    }};
}

impl FamilyId {
    pub const ALL: [FamilyId; 13] = [
        FamilyId::GenericW,
        FamilyId::EdGeneric,
        FamilyId::TypeIIpppp,
        FamilyId::TypeIIppmm,
        FamilyId::TypeDpppp,
        FamilyId::TypeDppmm,
        FamilyId::TypeIIIpppp,
        FamilyId::TypeIIIppppSym,
        FamilyId::TypeIIIppmm,
        FamilyId::TypeIIIppmmSym,
        FamilyId::TypeNpppp,
        FamilyId::TypeN2d,
        FamilyId::TypeN3d,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyId::GenericW => "generic-w",
            FamilyId::EdGeneric => "ed-generic",
            FamilyId::TypeIIpppp => "type-ii-pppp",
            FamilyId::TypeIIppmm => "type-ii-ppmm",
            FamilyId::TypeDpppp => "type-d-pppp",
            FamilyId::TypeDppmm => "type-d-ppmm",
            FamilyId::TypeIIIpppp => "type-iii-pppp",
            FamilyId::TypeIIIppppSym => "type-iii-pppp-sym",
            FamilyId::TypeIIIppmm => "type-iii-ppmm",
            FamilyId::TypeIIIppmmSym => "type-iii-ppmm-sym",
            FamilyId::TypeNpppp => "type-n-pppp",
            FamilyId::TypeN2d => "type-n-2d",
            FamilyId::TypeN3d => "type-n-3d",
        }
    }

    pub fn chart(&self) -> Chart {
        match self {
            FamilyId::GenericW | FamilyId::TypeDpppp | FamilyId::TypeDppmm => Chart::Y,
            FamilyId::EdGeneric | FamilyId::TypeNpppp | FamilyId::TypeN2d | FamilyId::TypeN3d => Chart::Z,
            _ => Chart::W,
        }
    }

    pub fn params(&self) -> &'static [ParamSpec] {
        const Q: &[&str] = &["q"];
        const W: &[&str] = &["w"];
        match self {
            FamilyId::GenericW => params![
                function("W", &["q", "x", "y"], "x^2*y^2/4 - y^2/(4*x)"),
                constant("lambda", "3"),
            ],
            FamilyId::EdGeneric => params![
                function("E", &["q", "z"], "z^2"),
                function("Dz", &["q", "z"], "0"),
                constant("lambda", "0"),
            ],
            FamilyId::TypeIIpppp => params![
                constant("lambda", "3"),
                function("Q", Q, "q"),
                function("H", W, "w^2"),
                base("inf"),
            ],
            FamilyId::TypeIIppmm => params![constant("lambda", "3"), function("F", W, "w"), base("inf")],
            FamilyId::TypeDpppp => params![constant("lambda", "3"), constant("c0", "1"), constant("d0", "2")],
            FamilyId::TypeDppmm => params![constant("lambda", "3"), constant("b0", "1")],
            FamilyId::TypeIIIpppp => params![function("S", W, "w^2"), function("F", W, "w"), base("inf")],
            FamilyId::TypeIIIppppSym => params![constant("chi0", "1"), constant("Z0", "1"), base("0")],
            FamilyId::TypeIIIppmm => params![function("F", W, "w"), base("inf")],
            FamilyId::TypeIIIppmmSym => params![constant("chi0", "1"), base("inf")],
            FamilyId::TypeNpppp => params![constant("b0", "1"), function("H", &["t"], "t^3")],
            FamilyId::TypeN2d => params![function("H", &["z"], "z^3")],
            FamilyId::TypeN3d => params![constant("alpha0", "2"), constant("gamma0", "1"), constant("H0", "1")],
        }
    }

    /// Parameter signature such as `type-n-pppp(b0 = 1, H(t) = t^3)`.
    pub fn signature(&self) -> String {
        let parts: Vec<String> = self
            .params()
            .iter()
            .map(|p| match p.kind {
                ParamKind::Function(vars) => format!("{}({}) = {}", p.name, vars.join(","), p.default),
                _ => format!("{} = {}", p.name, p.default),
            })
            .collect();
        format!("{}({})", self.as_str(), parts.join(", "))
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<FamilyId, FamilyError> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        FamilyId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == key || id.as_str().replace('-', "") == key.replace('-', ""))
            .ok_or_else(|| FamilyError::UnknownFamily(s.to_string()))
    }
}

/// Family id plus parameter overrides; missing parameters take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyId,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl FamilySpec {
    pub fn new(family: FamilyId) -> FamilySpec {
        FamilySpec {
            family,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: &str) -> Result<FamilySpec, FamilyError> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), FamilyError> {
        if !self.family.params().iter().any(|p| p.name == name) {
            return Err(FamilyError::UnknownParameter {
                family: self.family,
                name: name.to_string(),
            });
        }
        self.params.insert(name.to_string(), value.trim().to_string());
        Ok(())
    }

    /// All parameters, defaults filled in.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.family
            .params()
            .iter()
            .map(|p| {
                let v = self.params.get(p.name).cloned().unwrap_or_else(|| p.default.to_string());
                (p.name.to_string(), v)
            })
            .collect()
    }

    fn text(&self, name: &str) -> Result<String, FamilyError> {
        self.resolved().remove(name).ok_or_else(|| FamilyError::UnknownParameter {
            family: self.family,
            name: name.to_string(),
        })
    }

    fn constant(&self, name: &str) -> Result<C64, FamilyError> {
        let text = self.text(name)?;
        let wrap = |source| FamilyError::Parameter {
            name: name.to_string(),
            source,
        };
        expr::parse(&text).and_then(|e| e.constant_value()).map_err(wrap)
    }

    fn function(&self, name: &str) -> Result<Expr, FamilyError> {
        let vars = match self.family.params().iter().find(|p| p.name == name).map(|p| p.kind) {
            Some(ParamKind::Function(vars)) => vars,
            _ => {
                return Err(FamilyError::UnknownParameter {
                    family: self.family,
                    name: name.to_string(),
                })
            }
        };
        expr::parse_vars(&self.text(name)?, vars).map_err(|source| FamilyError::Parameter {
            name: name.to_string(),
            source,
        })
    }

    fn base(&self) -> Result<Base, FamilyError> {
        let text = self.text("w0")?;
        match text.as_str() {
            "inf" | "infinity" => Ok(Base::InfinityRay),
            "0" => Ok(Base::ZeroRay),
            _ => Ok(Base::Point(self.constant("w0")?)),
        }
    }

    pub fn build(&self) -> Result<Family, FamilyError> {
        Family::build(self)
    }
}

/// Symmetry generator attached to a family.
#[derive(Debug, Clone)]
pub struct Generator {
    pub name: String,
    pub vector: SymmetryVector,
}

/// Labels a family claims.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    /// Type symbol as printed in reports.
    pub claim: String,
    pub asd: Option<PetrovType>,
    pub optics: Option<String>,
    pub algebra: Option<AlgebraName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    /// Must stay above [`DENOMINATOR_GUARD`].
    Denominator,
    /// Must stay above the nonvanishing tolerance.
    Nonvanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub kind: ConditionKind,
}

fn den(name: &str, v: C64) -> Condition {
    Condition {
        name: name.to_string(),
        value: v.norm(),
        kind: ConditionKind::Denominator,
    }
}

fn nonvan(name: &str, v: f64) -> Condition {
    Condition {
        name: name.to_string(),
        value: v,
        kind: ConditionKind::Nonvanishing,
    }
}

/// Jets of E(q, z) and D_z(q, z) at a point, as 2-variable jets in (q, z).
#[derive(Debug, Clone)]
pub struct EdJets {
    pub q: C64,
    pub z: C64,
    pub lambda: C64,
    pub e: Jet,
    pub dz: Jet,
}

impl EdJets {
    /// `∂_q^i ∂_z^j E`.
    pub fn e(&self, i: u8, j: u8) -> C64 {
        self.e.partial(&[i, j])
    }

    /// `∂_q^i ∂_z^j D_z`.
    pub fn dz(&self, i: u8, j: u8) -> C64 {
        self.dz.partial(&[i, j])
    }
}

/// Derivative `e^{(k)}(u)` of a one-variable expression, carried on the jet `u`.
pub fn deriv_on(e: &Expr, u: &Jet, k: usize) -> Result<Jet, JetError> {
    let mut g = expr::eval_jet(e, u.value(), u.order() + k)?;
    for _ in 0..k {
        g = g.diff(0);
    }
    g.compose(std::slice::from_ref(u))
}

/// A Walker metric given chart-wise by its coefficient jets.
pub trait WalkerField: MetricField {
    /// A, Q, B of the given order and y one order higher, in the native chart.
    fn walker(&self, pt: &JetPoint, order: usize) -> GeoResult<WalkerJets>;
}

fn expect_chart(pt: &JetPoint, chart: Chart) -> GeoResult<()> {
    if pt.chart != chart {
        return Err(JetError::InvalidArgument(format!(
            "point is in the {:?} chart, the field lives in the {:?} chart",
            pt.chart, chart
        ))
        .into());
    }
    Ok(())
}

fn walker_tetrad<F: WalkerField + ?Sized>(f: &F, pt: &JetPoint, order: usize) -> GeoResult<Tetrad> {
    let jets = f.walker(pt, order)?;
    let x = crate::jets::lift(pt, 2, order)?;
    jets.tetrad(&x)
}

/// Walker coefficients from (E, D) data; every argument has the same shape.
///
/// `A = k + (x/2)E_zz + x²D_zz`, `Q = −kz − (xz/2)E_zz + x²(D_z − zD_zz)`,
/// `B = kz² − (x/2)(2E − z²E_zz) + x²(z²D_zz − 2zD_z)` with `k = x³/2 + Λ/3`.
pub fn walker_from_ed(x: &Jet, z: &Jet, e: &Jet, ezz: &Jet, dz: &Jet, dzz: &Jet, lambda: C64) -> (Jet, Jet, Jet) {
    let x2 = x * x;
    let k = (&x2 * x) * 0.5 + lambda / 3.0;
    let z2 = z * z;
    let half_x = x * 0.5;
    let a = &k + &half_x * ezz + &x2 * dzz;
    let q = -(&k * z) - &half_x * z * ezz + &x2 * (dz - z * dzz);
    let b = &k * &z2 - &half_x * (e * 2.0 - &z2 * ezz) + &x2 * (&z2 * dzz - z * dz * 2.0);
    (a, q, b)
}

/// Key function `W(q, x, y)` with cosmological constant Λ and μ₀ = 1.
#[derive(Debug, Clone)]
pub struct KeyFunctionSpec {
    pub w: Expr,
    pub lambda: C64,
}

impl KeyFunctionSpec {
    pub fn parse(text: &str, lambda: C64) -> Result<KeyFunctionSpec, ExprError> {
        Ok(KeyFunctionSpec {
            w: expr::parse_vars(text, &["q", "x", "y"])?,
            lambda,
        })
    }

    /// W as a 4-variable jet in (q, p, x, y).
    pub fn w_jet(&self, pt: &JetPoint, order: usize) -> GeoResult<Jet> {
        expect_chart(pt, Chart::Y)?;
        let [q, _, x, y] = lift_all(pt, order)?;
        Ok(self.w.eval_multi(&[q, x, y])?)
    }

    /// A, Q, B jets of the given order.
    pub fn abqs(&self, pt: &JetPoint, order: usize) -> GeoResult<(Jet, Jet, Jet)> {
        let w = self.w_jet(pt, order + 2)?;
        let x = crate::jets::lift(pt, 2, order + 2)?;
        Ok(abq_from_key(&w, &x, c(1.0), self.lambda))
    }

    pub fn hh_residual(&self, pt: &JetPoint) -> GeoResult<C64> {
        Ok(hh_residual(&self.w_jet(pt, 2)?, pt.x(), self.lambda))
    }
}

impl MetricField for KeyFunctionSpec {
    fn chart(&self) -> Chart {
        Chart::Y
    }

    fn tetrad(&self, pt: &JetPoint, order: usize) -> GeoResult<Tetrad> {
        walker_tetrad(self, pt, order)
    }
}

impl WalkerField for KeyFunctionSpec {
    fn walker(&self, pt: &JetPoint, order: usize) -> GeoResult<WalkerJets> {
        let (a, q, b) = self.abqs(pt, order)?;
        let y = crate::jets::lift(pt, 3, order + 1)?;
        Ok(WalkerJets { a, q, b, y })
    }
}

/// Left side of the expanding hyperheavenly equation (μ₀ = 1) for a key function
/// jet in (q, p, x, y) of order ≥ 2:
/// `W_xxW_yy − W_xy² + (2/x)(W_yW_xy − W_xW_yy) + W_qy/x − (x²W_xx − 3xW_x + 3W) − ΛW_xx/(6x)`.
pub fn hh_residual(w: &Jet, x: C64, lambda: C64) -> C64 {
    let d = |a: [u8; 4]| w.partial(&a);
    let wx = d([0, 0, 1, 0]);
    let wy = d([0, 0, 0, 1]);
    let wxx = d([0, 0, 2, 0]);
    let wxy = d([0, 0, 1, 1]);
    let wyy = d([0, 0, 0, 2]);
    let wqy = d([1, 0, 0, 1]);
    wxx * wyy - wxy * wxy + (wy * wxy - wx * wyy) * 2.0 / x + wqy / x
        - (x * x * wxx - x * wx * 3.0 + w.value() * 3.0)
        - lambda * wxx / (x * 6.0)
}

/// The four second-order conditions that A, Q, B from a key function satisfy
/// identically (with the 2Λ term moved to the left). Jets in (q, p, x, y), order ≥ 2.
pub fn middle_triplet_residuals(a: &Jet, q: &Jet, b: &Jet, x: C64, lambda: C64) -> [C64; 4] {
    let p = |j: &Jet, ix: u8, iy: u8| j.partial(&[0, 0, ix, iy]);
    let x2 = x * x;
    let x3 = x2 * x;
    let dx_a = -a.value() * 2.0 / x3 + p(a, 1, 0) / x2;
    let dy_q = p(q, 0, 1) / x2;
    [
        x2 * (p(a, 2, 0) + p(q, 1, 1) * 2.0 + p(b, 0, 2)) - x3 * 6.0 * dx_a - x3 * 6.0 * dy_q - lambda * 2.0,
        x2 * (p(b, 1, 1) + p(q, 2, 0)) - x * p(q, 1, 0) * 2.0,
        x2 * (p(b, 0, 2) - p(a, 2, 0)) - x * (p(q, 0, 1) - p(a, 1, 0)) * 2.0,
        x2 * (p(q, 0, 2) + p(a, 1, 1)) - x * p(a, 0, 1) * 2.0,
    ]
}

/// `(EE_zzz − E_zzq − 2ΛD_z, D_zq − ED_zz + D_zE_z)`.
pub fn reduced_residuals(ed: &EdJets) -> (C64, C64) {
    let r1 = ed.e(0, 0) * ed.e(0, 3) - ed.e(1, 2) - ed.lambda * ed.dz(0, 0) * 2.0;
    let r2 = ed.dz(1, 0) - ed.e(0, 0) * ed.dz(0, 1) + ed.dz(0, 0) * ed.e(0, 1);
    (r1, r2)
}

/// `H = −2F_wQ_q/(F + Q)²` checked against `H = −∂_w(H_q/H)`.
pub fn liouville_residual(f: &Expr, qf: &Expr, q: C64, w: C64) -> Result<C64, JetError> {
    let qj = Jet::variable(2, 2, 0, q)?;
    let wj = Jet::variable(2, 2, 1, w)?;
    let ff = f.eval_on(&wj)?;
    let fw = deriv_on(f, &wj, 1)?;
    let qq = qf.eval_on(&qj)?;
    let qd = deriv_on(qf, &qj, 1)?;
    let s = &ff + &qq;
    let h = (fw * qd * -2.0).div(&(&s * &s))?;
    let ratio = h.diff(0).div(&h.truncate(1))?;
    Ok(h.value() + ratio.d(1))
}

/// Coordinate change preserving the key-function form, with λ₀ = 1:
/// `q' = q'(q)`, `p' = p + h(q)`, `x' = x`, `y' = (y + h_q x)/f + σ`, `f = q'_q`.
#[derive(Debug, Clone)]
pub struct Gauge {
    pub qprime: Expr,
    pub h: Expr,
    pub sigma: Expr,
    pub l: Expr,
    pub lambda0: C64,
}

impl Gauge {
    pub fn identity() -> Gauge {
        let q = expr::parse_in("q", "q").expect("literal");
        let zero = expr::parse_in("0", "q").expect("literal");
        Gauge {
            qprime: q,
            h: zero.clone(),
            sigma: zero.clone(),
            l: zero,
            lambda0: c(1.0),
        }
    }

    pub fn parse(qprime: &str, h: &str, sigma: &str, l: &str) -> Result<Gauge, ExprError> {
        Ok(Gauge {
            qprime: expr::parse_in(qprime, "q")?,
            h: expr::parse_in(h, "q")?,
            sigma: expr::parse_in(sigma, "q")?,
            l: expr::parse_in(l, "q")?,
            lambda0: c(1.0),
        })
    }

    /// Primed coordinates of an unprimed y-chart point, as jets of the given order.
    pub fn forward(&self, pt: &JetPoint, order: usize) -> GeoResult<[Jet; 4]> {
        let [q, p, x, y] = lift_all(pt, order + 1)?;
        let f = deriv_on(&self.qprime, &q, 1)?;
        let hq = deriv_on(&self.h, &q, 1)?;
        let qp = self.qprime.eval_on(&q)?;
        let pp = &p + &self.h.eval_on(&q)?;
        let yp = (&y + &hq * &x).div(&f)? + self.sigma.eval_on(&q)?;
        Ok([qp, pp, x, yp].map(|j| j.truncate(order)))
    }
}

/// Apply a gauge to a key function.
pub fn gauge_transform(spec: &KeyFunctionSpec, gauge: &Gauge) -> Result<GaugedKeyFunction, FamilyError> {
    if (gauge.lambda0 - c(1.0)).norm() > 0.0 {
        return Err(FamilyError::GaugeRestriction(format!(
            "with μ₀ normalized to 1 the scaling λ₀ must be 1, got {}",
            gauge.lambda0
        )));
    }
    Ok(GaugedKeyFunction {
        base: spec.clone(),
        gauge: gauge.clone(),
    })
}

/// Key function W' in primed coordinates.
#[derive(Debug, Clone)]
pub struct GaugedKeyFunction {
    pub base: KeyFunctionSpec,
    pub gauge: Gauge,
}

impl GaugedKeyFunction {
    /// Solve `q'(q) = target` by Newton iteration started at the target.
    fn solve_q(&self, target: C64) -> GeoResult<C64> {
        let mut q = target;
        for _ in 0..100 {
            let j = expr::eval_jet(&self.gauge.qprime, q, 1)?;
            let step = (j.value() - target) / j.partial(&[1]);
            q -= step;
            if step.norm() <= 1e-15 * (1.0 + q.norm()) {
                return Ok(q);
            }
        }
        Err(GeometryError::Constraint {
            constraint: "q'(q) invertible near the point".into(),
            value: q.norm(),
        })
    }

    /// `W'` as a jet in primed (q', p', x', y') at a primed y-chart point.
    pub fn w_jet(&self, pt: &JetPoint, order: usize) -> GeoResult<Jet> {
        expect_chart(pt, Chart::Y)?;
        let g = &self.gauge;
        let lambda = self.base.lambda;
        let [qp, _, x, yp] = lift_all(pt, order)?;
        // invert q' = q'(q) as a jet
        let q0 = self.solve_q(qp.value())?;
        let f0 = expr::eval_jet(&g.qprime, q0, 1)?.partial(&[1]);
        let mut q = qp.lift_const(q0);
        for _ in 0..=order {
            let r = g.qprime.eval_on(&q)? - &qp;
            q = q - r.scale(f0.inv());
        }
        let f = deriv_on(&g.qprime, &q, 1)?;
        let fq = deriv_on(&g.qprime, &q, 2)?;
        let fqq = deriv_on(&g.qprime, &q, 3)?;
        let hq = deriv_on(&g.h, &q, 1)?;
        let hqq = deriv_on(&g.h, &q, 2)?;
        let sigma = g.sigma.eval_on(&q)?;
        let sigma_q = deriv_on(&g.sigma, &q, 1)?;
        let l = g.l.eval_on(&q)?;
        let y = &f * (&yp - &sigma) - &hq * &x;
        let w = self.base.w.eval_multi(&[q.clone(), x.clone(), y.clone()])?;
        let f2 = &f * &f;
        // 3M = f^{1/2} ∂²(f^{-1/2}) − (Λ/3)L
        let m = ((&fq * &fq).div(&f2)? * 0.75 - fqq.div(&f)? * 0.5 - &l * (lambda / 3.0)) * (1.0 / 3.0);
        let x2 = &x * &x;
        let x3 = &x2 * &x;
        let d_hq_f = (&hqq * &f - &hq * &fq).div(&f2)?;
        let rhs = &w + &hq * 0.5 * (&x3 * &y + &hq * &x3 * &x * 0.5) - &l * &x3 * (1.0 / 3.0)
            + fq.div(&f)? * &x * &y * 0.5
            - &f * &d_hq_f * &x2 * 0.5
            - &hq * &y * (lambda / 6.0)
            - (&f * &sigma_q * 0.5 + &hq * &hq * (lambda / 12.0)) * &x
            - m;
        Ok(rhs.div(&f2)?)
    }
}

impl MetricField for GaugedKeyFunction {
    fn chart(&self) -> Chart {
        Chart::Y
    }

    fn tetrad(&self, pt: &JetPoint, order: usize) -> GeoResult<Tetrad> {
        walker_tetrad(self, pt, order)
    }
}

impl WalkerField for GaugedKeyFunction {
    fn walker(&self, pt: &JetPoint, order: usize) -> GeoResult<WalkerJets> {
        let w = self.w_jet(pt, order + 2)?;
        let x = crate::jets::lift(pt, 2, order + 2)?;
        let (a, q, b) = abq_from_key(&w, &x, c(1.0), self.base.lambda);
        let y = crate::jets::lift(pt, 3, order + 1)?;
        Ok(WalkerJets { a, q, b, y })
    }
}

/// Format a complex constant as an expression literal.
fn lit(v: C64) -> String {
    if v.im == 0.0 {
        format!("({})", v.re)
    } else {
        format!("({}+{}*i)", v.re, v.im)
    }
}

#[derive(Debug, Clone)]
enum EForm {
    /// Polynomial in z, coefficients in ascending order.
    Poly(Vec<C64>),
    Expr(Expr),
}

#[derive(Debug, Clone)]
enum DzForm {
    Poly(Vec<C64>),
    Expr(Expr),
    /// `H(z)` with no q dependence.
    OfZ(Expr),
    /// `z²H(t)`, `t = 1/z − b₀q`.
    TypeN { b0: C64, h: Expr },
    /// `H₀(z + s)^k`.
    Power { h0: C64, shift: C64, k: C64 },
    /// `H₀ exp(z/(2γ₀))`.
    Exp { h0: C64, gamma0: C64 },
}

fn poly(coeffs: &[C64], z: &Jet) -> Jet {
    let mut acc = z.lift_const(c(0.0));
    for &a in coeffs.iter().rev() {
        acc = (&acc * z).add_const(a);
    }
    acc
}

impl EForm {
    fn eval(&self, q: &Jet, z: &Jet) -> Result<Jet, JetError> {
        match self {
            EForm::Poly(a) => Ok(poly(a, z)),
            EForm::Expr(e) => e.eval_multi(&[q.clone(), z.clone()]),
        }
    }
}

impl DzForm {
    fn eval(&self, q: &Jet, z: &Jet) -> Result<Jet, JetError> {
        match self {
            DzForm::Poly(a) => Ok(poly(a, z)),
            DzForm::Expr(e) => e.eval_multi(&[q.clone(), z.clone()]),
            DzForm::OfZ(h) => h.eval_on(z),
            DzForm::TypeN { b0, h } => {
                let t = z.recip()? - q * *b0;
                Ok(z * z * h.eval_on(&t)?)
            }
            DzForm::Power { h0, shift, k } => Ok(z.add_const(*shift).pow(*k)? * *h0),
            DzForm::Exp { h0, gamma0 } => Ok((z * (1.0 / (*gamma0 * 2.0))).exp() * *h0),
        }
    }
}

#[derive(Debug, Clone)]
enum ProfileKind {
    /// Abel example: `E_zz = m = sqrt(6ΛH_w/(Q − H))`.
    Abel { q: Expr, h: Expr },
    /// `Z = ∫ −2F_s/(S(s)(q + F)²) ds`, `E_zz = S(w)`; `S = w` when absent.
    Liouville { f: Expr, s: Option<Expr> },
    /// `Z = ∫ Z₀s(q − 3 ln s/(2χ₀))⁻² ds`, `E_zz = 3/(χ₀Z₀w²)`.
    SymPppp { chi0: C64, z0: C64 },
    /// `Z = ∫ −(3/(2χ₀))s⁻²(q + 3 ln s/(4χ₀))⁻² ds`, `E_zz = w`.
    SymPpmm { chi0: C64 },
}

fn abel_m(qf: &Expr, h: &Expr, lambda: C64, q: &Jet, w: &Jet) -> Result<Jet, JetError> {
    let hw = deriv_on(h, w, 1)?;
    let den = qf.eval_on(q)? - h.eval_on(w)?;
    (hw * (lambda * 6.0)).div(&den)?.sqrt()
}

impl ProfileKind {
    fn integrand(&self, lambda: C64) -> impl Fn(&Jet, &Jet) -> Result<Jet, JetError> + Send + Sync + 'static {
        let kind = self.clone();
        move |q: &Jet, s: &Jet| match &kind {
            ProfileKind::Abel { q: qf, h } => {
                let m = abel_m(qf, h, lambda, q, s)?;
                let qd = deriv_on(qf, q, 1)?;
                let den = qf.eval_on(q)? - h.eval_on(s)?;
                Ok((qd * m).div(&den)? * (1.0 / (lambda * 4.0)))
            }
            ProfileKind::Liouville { f, s: weight } => {
                let fs = deriv_on(f, s, 1)?;
                let sum = q + &f.eval_on(s)?;
                let wgt = match weight {
                    Some(e) => e.eval_on(s)?,
                    None => s.clone(),
                };
                (fs * -2.0).div(&(wgt * &sum * &sum))
            }
            ProfileKind::SymPppp { chi0, z0 } => {
                let k = c(1.5) / *chi0;
                let d = q - &(s.ln()? * k);
                Ok((s * *z0).div(&(&d * &d))?)
            }
            ProfileKind::SymPpmm { chi0 } => {
                let k = c(0.75) / *chi0;
                let d = q + &(s.ln()? * k);
                let den = s * s * &d * &d;
                Ok(den.recip()? * (c(-1.5) / *chi0))
            }
        }
    }

    fn ezz(&self, lambda: C64, q: &Jet, w: &Jet) -> Result<Jet, JetError> {
        match self {
            ProfileKind::Abel { q: qf, h } => abel_m(qf, h, lambda, q, w),
            ProfileKind::Liouville { s: Some(s), .. } => s.eval_on(w),
            ProfileKind::Liouville { s: None, .. } | ProfileKind::SymPpmm { .. } => Ok(w.clone()),
            ProfileKind::SymPppp { chi0, z0 } => Ok((w * w).recip()? * (c(3.0) / (*chi0 * *z0))),
        }
    }

    fn pppp(&self) -> bool {
        matches!(
            self,
            ProfileKind::Abel { .. } | ProfileKind::Liouville { s: Some(_), .. } | ProfileKind::SymPppp { .. }
        )
    }
}

#[derive(Debug, Clone)]
struct ProfileModel {
    kind: ProfileKind,
    profile: Arc<IntegralProfile>,
}

#[derive(Debug, Clone)]
enum Model {
    /// y-chart key function, with closed-form (E, D_z) when known.
    Key { key: KeyFunctionSpec, ed: Option<(EForm, DzForm)> },
    /// z-chart (E, D_z) data.
    Ed { e: EForm, dz: DzForm },
    /// w-chart integral profile.
    Profile(ProfileModel),
}

/// A concrete family: a metric field plus its claims and generators.
#[derive(Debug, Clone)]
pub struct Family {
    spec: FamilySpec,
    lambda: C64,
    model: Model,
    generators: Vec<Generator>,
    expectation: Expectation,
}

fn invalid(name: &str, what: &str) -> FamilyError {
    FamilyError::Invalid {
        name: name.to_string(),
        what: what.to_string(),
    }
}

fn generator(name: &str, a: &str, cc: &str, chi0: C64) -> Generator {
    Generator {
        name: name.to_string(),
        vector: SymmetryVector::new(a, cc, "0", chi0).expect("generator formulas parse"),
    }
}

fn nonzero(name: &str, v: C64) -> Result<C64, FamilyError> {
    if v.norm() < 1e-12 {
        Err(invalid(name, "nonzero"))
    } else {
        Ok(v)
    }
}

impl Family {
    pub fn build(spec: &FamilySpec) -> Result<Family, FamilyError> {
        let id = spec.family;
        let resolved = FamilySpec {
            family: id,
            params: spec.resolved(),
        };
        let k1 = generator("K1", "0", "1", c(0.0));
        let k2 = generator("K2", "1", "0", c(0.0));
        let pm = "\u{2212}\u{2212}";
        let expect = |claim: &str, asd: PetrovType, optics: &str, algebra: AlgebraName| Expectation {
            claim: claim.to_string(),
            asd: Some(asd),
            optics: Some(optics.to_string()),
            algebra: Some(algebra),
        };
        let profile = |kind: ProfileKind, lambda: C64| -> Result<Model, FamilyError> {
            let integrand = kind.integrand(lambda);
            Ok(Model::Profile(ProfileModel {
                kind,
                profile: Arc::new(IntegralProfile::new(integrand, spec.base()?)),
            }))
        };
        let (lambda, model, generators, expectation) = match id {
            FamilyId::GenericW => {
                let lambda = spec.constant("lambda")?;
                let key = KeyFunctionSpec {
                    w: spec.function("W")?,
                    lambda,
                };
                let exp = Expectation {
                    claim: "key-function space".into(),
                    asd: None,
                    optics: None,
                    algebra: None,
                };
                (lambda, Model::Key { key, ed: None }, vec![k1], exp)
            }
            FamilyId::EdGeneric => {
                let lambda = spec.constant("lambda")?;
                let model = Model::Ed {
                    e: EForm::Expr(spec.function("E")?),
                    dz: DzForm::Expr(spec.function("Dz")?),
                };
                let exp = Expectation {
                    claim: "{[D]^ee \u{2297} [any]}".into(),
                    asd: None,
                    optics: None,
                    algebra: None,
                };
                (lambda, model, vec![k1], exp)
            }
            FamilyId::TypeDpppp | FamilyId::TypeDppmm => {
                let lambda = nonzero("lambda", spec.constant("lambda")?)?;
                let (a, b, cc, d) = if id == FamilyId::TypeDpppp {
                    (c(1.0), c(0.0), spec.constant("c0")?, spec.constant("d0")?)
                } else {
                    (c(0.0), spec.constant("b0")?, c(0.0), c(0.0))
                };
                let key = KeyFunctionSpec::parse(&type_d_key_function(a, b, cc, d, lambda), lambda)
                    .map_err(|source| FamilyError::Parameter {
                        name: "W".into(),
                        source,
                    })?;
                let e = EForm::Poly(vec![d, cc, b, a]);
                let s = c(3.0) / lambda;
                let dz = DzForm::Poly(vec![s * a * d, s * a * cc, s * a * b, s * a * a]);
                let model = Model::Key { key, ed: Some((e, dz)) };
                if id == FamilyId::TypeDpppp {
                    let exp = expect(
                        "{[D]^ee \u{2297} [D]^nn, [++,++,++,++]}",
                        PetrovType::D,
                        "[++,++,++,++]",
                        AlgebraName::TwoA1,
                    );
                    (lambda, model, vec![k1, k2], exp)
                } else {
                    let b0 = b;
                    let k3 = generator("K3", "q", "0", c(0.0));
                    let k4 = generator("K4", &format!("-{}*q^2", lit(b0)), "q", c(0.0));
                    let algebra = if b0.norm() > 1e-12 {
                        AlgebraName::A38PlusA1
                    } else {
                        AlgebraName::A48
                    };
                    let exp = expect(
                        "{[D]^ee \u{2297} [D]^nn, [++,\u{2212}\u{2212},\u{2212}\u{2212},++]}",
                        PetrovType::D,
                        &format!("[++,{pm},{pm},++]"),
                        algebra,
                    );
                    (lambda, model, vec![k1, k2, k3, k4], exp)
                }
            }
            FamilyId::TypeIIpppp => {
                let lambda = nonzero("lambda", spec.constant("lambda")?)?;
                let kind = ProfileKind::Abel {
                    q: spec.function("Q")?,
                    h: spec.function("H")?,
                };
                let exp = expect(
                    "{[D]^ee \u{2297} [II]^n, [++,++]}",
                    PetrovType::II,
                    "[++,++]",
                    AlgebraName::A1,
                );
                (lambda, profile(kind, lambda)?, vec![k1], exp)
            }
            FamilyId::TypeIIppmm | FamilyId::TypeIIIppmm => {
                let lambda = if id == FamilyId::TypeIIppmm {
                    nonzero("lambda", spec.constant("lambda")?)?
                } else {
                    c(0.0)
                };
                let kind = ProfileKind::Liouville {
                    f: spec.function("F")?,
                    s: None,
                };
                let (claim, asd) = if id == FamilyId::TypeIIppmm {
                    ("{[D]^ee \u{2297} [II]^n, [++,\u{2212}\u{2212}]}", PetrovType::II)
                } else {
                    ("{[D]^ee \u{2297} [III]^n, [++,\u{2212}\u{2212}]}", PetrovType::III)
                };
                let exp = expect(claim, asd, &format!("[++,{pm}]"), AlgebraName::A1);
                (lambda, profile(kind, lambda)?, vec![k1], exp)
            }
            FamilyId::TypeIIIpppp => {
                let kind = ProfileKind::Liouville {
                    f: spec.function("F")?,
                    s: Some(spec.function("S")?),
                };
                let exp = expect(
                    "{[D]^ee \u{2297} [III]^n, [++,++]}",
                    PetrovType::III,
                    "[++,++]",
                    AlgebraName::A1,
                );
                (c(0.0), profile(kind, c(0.0))?, vec![k1], exp)
            }
            FamilyId::TypeIIIppppSym | FamilyId::TypeIIIppmmSym => {
                let chi0 = nonzero("chi0", spec.constant("chi0")?)?;
                let (kind, claim, optics) = if id == FamilyId::TypeIIIppppSym {
                    let z0 = nonzero("Z0", spec.constant("Z0")?)?;
                    (
                        ProfileKind::SymPppp { chi0, z0 },
                        "{[D]^ee \u{2297} [III]^n, [++,++]}",
                        "[++,++]".to_string(),
                    )
                } else {
                    (
                        ProfileKind::SymPpmm { chi0 },
                        "{[D]^ee \u{2297} [III]^n, [++,\u{2212}\u{2212}]}",
                        format!("[++,{pm}]"),
                    )
                };
                let k2 = generator("K2", "1", "0", chi0);
                let exp = expect(claim, PetrovType::III, &optics, AlgebraName::A21);
                (c(0.0), profile(kind, c(0.0))?, vec![k1, k2], exp)
            }
            FamilyId::TypeNpppp => {
                let b0 = spec.constant("b0")?;
                let model = Model::Ed {
                    e: EForm::Poly(vec![c(0.0), c(0.0), b0]),
                    dz: DzForm::TypeN {
                        b0,
                        h: spec.function("H")?,
                    },
                };
                let exp = expect("{[D]^ee \u{2297} [N]^n, [++,++]}", PetrovType::N, "[++,++]", AlgebraName::A1);
                (c(0.0), model, vec![k1], exp)
            }
            FamilyId::TypeN2d => {
                let model = Model::Ed {
                    e: EForm::Poly(vec![]),
                    dz: DzForm::OfZ(spec.function("H")?),
                };
                let exp = expect(
                    "{[D]^ee \u{2297} [N]^n, [++,++]}",
                    PetrovType::N,
                    "[++,++]",
                    AlgebraName::TwoA1,
                );
                (c(0.0), model, vec![k1, k2], exp)
            }
            FamilyId::TypeN3d => {
                let alpha0 = spec.constant("alpha0")?;
                let gamma0 = spec.constant("gamma0")?;
                let h0 = nonzero("H0", spec.constant("H0")?)?;
                let near = |v: f64| (alpha0 - c(v)).norm() < 1e-12;
                if near(0.5) || near(1.5) {
                    return Err(invalid("alpha0", "different from 1/2 and 3/2"));
                }
                let (dz, algebra) = if near(1.0) {
                    let gamma0 = nonzero("gamma0", gamma0)?;
                    (DzForm::Exp { h0, gamma0 }, AlgebraName::A32)
                } else {
                    let shift = gamma0 / (alpha0 - 1.0);
                    let k = (alpha0 * 2.0 - 1.0) / (alpha0 * 2.0 - 2.0);
                    let algebra = if near(-1.0) {
                        AlgebraName::A34
                    } else if near(0.0) {
                        AlgebraName::A21PlusA1
                    } else {
                        AlgebraName::A35(alpha0.re)
                    };
                    (DzForm::Power { h0, shift, k }, algebra)
                };
                let model = Model::Ed {
                    e: EForm::Poly(vec![]),
                    dz,
                };
                let k3 = generator("K3", &format!("{}*q", lit(alpha0)), &format!("{}*q", lit(gamma0)), c(0.75));
                let exp = expect("{[D]^ee \u{2297} [N]^n, [++,++]}", PetrovType::N, "[++,++]", algebra);
                (c(0.0), model, vec![k1, k2, k3], exp)
            }
        };
        Ok(Family {
            spec: resolved,
            lambda,
            model,
            generators,
            expectation,
        })
    }

    pub fn id(&self) -> FamilyId {
        self.spec.family
    }

    /// Spec with every parameter resolved.
    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn expectation(&self) -> &Expectation {
        &self.expectation
    }

    /// True for the two type-D families, whose optics carry four labels.
    pub fn is_type_d(&self) -> bool {
        matches!(self.id(), FamilyId::TypeDpppp | FamilyId::TypeDppmm)
    }

    /// Key function, for y-chart families.
    pub fn key_function(&self) -> Option<&KeyFunctionSpec> {
        match &self.model {
            Model::Key { key, .. } => Some(key),
            _ => None,
        }
    }

    fn profile_jet(&self, m: &ProfileModel, q: C64, w: C64, order: usize) -> GeoResult<Jet> {
        Ok(integrate(&m.profile, q, w, order)?.jet)
    }

    /// Hyperheavenly coordinates (q, p, x, y) of a native point.
    pub fn hyperheavenly(&self, pt: &JetPoint) -> GeoResult<[C64; 4]> {
        let y = self.walker(pt, 0)?.y.value();
        let k = pt.coords;
        Ok([k[0], k[1], k[2], y])
    }

    /// (E, D_z) jets of the given order in (q, z); `None` for families without (E, D) data.
    pub fn ed_jets(&self, pt: &JetPoint, order: usize) -> GeoResult<Option<EdJets>> {
        expect_chart(pt, self.chart())?;
        let [q0, _, x0, xi] = pt.coords;
        let plain = |e: &EForm, dz: &DzForm, z0: C64| -> GeoResult<EdJets> {
            let q = Jet::variable(2, order, 0, q0)?;
            let z = Jet::variable(2, order, 1, z0)?;
            Ok(EdJets {
                q: q0,
                z: z0,
                lambda: self.lambda,
                e: e.eval(&q, &z)?,
                dz: dz.eval(&q, &z)?,
            })
        };
        match &self.model {
            Model::Key { ed: None, .. } => Ok(None),
            Model::Key { ed: Some((e, dz)), .. } => plain(e, dz, -xi / x0).map(Some),
            Model::Ed { e, dz } => plain(e, dz, xi).map(Some),
            Model::Profile(m) => {
                let n = order + 1;
                let zj = self.profile_jet(m, q0, xi, n)?;
                let z0 = zj.value();
                let zw0 = zj.partial(&[0, 1]);
                let q = Jet::variable(2, n, 0, q0)?;
                let zt = Jet::variable(2, n, 1, z0)?;
                // w(q, z) from Z(q, w) = z
                let mut w = q.lift_const(xi);
                for _ in 0..=n {
                    let r = zj.compose(&[q.clone(), w.clone()])? - &zt;
                    w = w - r.scale(zw0.inv());
                }
                let args = [q.truncate(order), w.truncate(order)];
                let e = -zj.diff(0).compose(&args)?;
                let dz = if m.kind.pppp() {
                    zj.diff(1).compose(&args)?
                } else {
                    Jet::zero(2, order)?
                };
                Ok(Some(EdJets {
                    q: q0,
                    z: z0,
                    lambda: self.lambda,
                    e,
                    dz,
                }))
            }
        }
    }

    /// Pointwise family conditions: denominators and nonvanishing claims.
    pub fn conditions(&self, pt: &JetPoint) -> GeoResult<Vec<Condition>> {
        expect_chart(pt, self.chart())?;
        let [q, _, x, xi] = pt.coords;
        let mut out = vec![den("x", x)];
        let d3 = |h: &Expr, at: C64| -> GeoResult<f64> { Ok(expr::eval_jet(h, at, 3)?.partial(&[3]).norm()) };
        match (&self.model, self.id()) {
            (Model::Profile(m), _) => {
                let qj = Jet::variable(1, 1, 0, q)?;
                let wj = Jet::variable(1, 1, 0, xi)?;
                match &m.kind {
                    ProfileKind::Abel { q: qf, h } => {
                        out.push(den("Q - H", qf.eval(q)? - h.eval(xi)?));
                        out.push(den("Z_w", m.profile.integrand_at(&qj.lift_const(q), &wj)?.value()));
                        out.push(nonvan("Q_q", deriv_on(qf, &qj, 1)?.value().norm()));
                        let hj = expr::eval_jet(h, xi, 4)?;
                        let hw = hj.diff(0);
                        out.push(nonvan("H_w", hw.value().norm()));
                        let q2 = Jet::variable(2, 1, 0, q)?;
                        let w2 = Jet::variable(2, 1, 1, xi)?;
                        let mj = abel_m(qf, h, self.lambda, &q2, &w2)?;
                        out.push(nonvan("M_qw", mj.d(0).norm()));
                        let a = (hw.diff(0) * (self.lambda * 6.0)).div(&hw.truncate(2))?;
                        let (aw, aww, mw) = (a.partial(&[1]), a.partial(&[2]), mj.value());
                        let t1 = aw * mw;
                        let t2 = self.lambda * 12.0 * aww - a.value() * aw + aw * mw * mw * 3.0;
                        out.push(nonvan("type-II condition", t1.norm().max(t2.norm())));
                    }
                    ProfileKind::Liouville { f, s } => {
                        out.push(den("q + F", q + f.eval(xi)?));
                        out.push(nonvan("F_w", deriv_on(f, &wj, 1)?.value().norm()));
                        match s {
                            Some(s) => {
                                out.push(den("S", s.eval(xi)?));
                                out.push(den("Z_w", m.profile.integrand_at(&qj.lift_const(q), &wj)?.value()));
                                out.push(nonvan("S_w", deriv_on(s, &wj, 1)?.value().norm()));
                            }
                            None => out.push(den("w", xi)),
                        }
                    }
                    ProfileKind::SymPppp { chi0, .. } => {
                        out.push(den("w", xi));
                        out.push(den("q - 3 ln(w)/(2 chi0)", q - xi.ln() * (c(1.5) / *chi0)));
                        out.push(den("Z_w", m.profile.integrand_at(&qj.lift_const(q), &wj)?.value()));
                    }
                    ProfileKind::SymPpmm { chi0 } => {
                        out.push(den("w", xi));
                        out.push(den("q + 3 ln(w)/(4 chi0)", q + xi.ln() * (c(0.75) / *chi0)));
                    }
                }
            }
            (Model::Ed { dz, .. }, FamilyId::TypeNpppp) => {
                out.push(den("z", xi));
                if let DzForm::TypeN { b0, h } = dz {
                    out.push(nonvan("H_ttt", d3(h, xi.inv() - b0 * q)?));
                }
            }
            (Model::Ed { dz, .. }, FamilyId::TypeN2d | FamilyId::TypeN3d) => {
                if let DzForm::Power { shift, .. } = dz {
                    out.push(den("z + shift", xi + shift));
                }
                let zj = Jet::variable(2, 3, 1, xi)?;
                let qj = Jet::variable(2, 3, 0, q)?;
                let h = dz.eval(&qj, &zj)?;
                out.push(nonvan("H_zzz", h.partial(&[0, 3]).norm()));
            }
            _ => {}
        }
        Ok(out)
    }

    /// Accept or reject a point; on success returns the evaluated conditions.
    pub fn check_point(&self, pt: &JetPoint, nonvanish_tol: f64) -> GeoResult<Vec<Condition>> {
        let conds = self.conditions(pt)?;
        for cnd in &conds {
            let min = match cnd.kind {
                ConditionKind::Denominator => DENOMINATOR_GUARD,
                ConditionKind::Nonvanishing => nonvanish_tol,
            };
            if !(cnd.value >= min) {
                let rel = match cnd.kind {
                    ConditionKind::Denominator => format!("|{}| >= {}", cnd.name, min),
                    ConditionKind::Nonvanishing => format!("{} != 0", cnd.name),
                };
                return Err(GeometryError::Constraint {
                    constraint: rel,
                    value: cnd.value,
                });
            }
        }
        Ok(conds)
    }

    /// Abel residual `12ΛM_ww − M_w³ − aM_w` with `a = 6ΛH_ww/H_w`, for the type-II example.
    pub fn abel_residual(&self, pt: &JetPoint) -> GeoResult<Option<C64>> {
        let Model::Profile(ProfileModel {
            kind: ProfileKind::Abel { q: qf, h },
            ..
        }) = &self.model
        else {
            return Ok(None);
        };
        let [q, _, _, w] = pt.coords;
        let wj = Jet::variable(1, 1, 0, w)?;
        let m = abel_m(qf, h, self.lambda, &wj.lift_const(q), &wj)?;
        let hj = expr::eval_jet(h, w, 2)?;
        let a = self.lambda * 6.0 * hj.partial(&[2]) / hj.partial(&[1]);
        let mw = m.value();
        Ok(Some(self.lambda * 12.0 * m.d(0) - mw * mw * mw - a * mw))
    }

    fn profile_walker(&self, m: &ProfileModel, pt: &JetPoint, n: usize) -> GeoResult<WalkerJets> {
        let [q, _, x, w] = lift_all(pt, n + 2)?;
        let zj = self.profile_jet(m, pt.coords[0], pt.coords[3], n + 2)?.embed(4, &[0, 3])?;
        let zw = zj.diff(3);
        let e = -zj.diff(0).truncate(n);
        let ezz = m.kind.ezz(self.lambda, &q.truncate(n), &w.truncate(n))?;
        let (dz, dzz) = if m.kind.pppp() {
            if zw.value().norm() < DENOMINATOR_GUARD {
                return Err(GeometryError::Constraint {
                    constraint: format!("|Z_w| >= {DENOMINATOR_GUARD}"),
                    value: zw.value().norm(),
                });
            }
            let zwn = zw.truncate(n);
            (zwn.clone(), zw.diff(3).div(&zwn)?)
        } else {
            (Jet::zero(4, n)?, Jet::zero(4, n)?)
        };
        let (a, qq, b) = walker_from_ed(&x.truncate(n), &zj.truncate(n), &e, &ezz, &dz, &dzz, self.lambda);
        let y = -(x.truncate(n + 1) * zj.truncate(n + 1));
        Ok(WalkerJets { a, q: qq, b, y })
    }
}

/// Type-D key function with E = az³ + bz² + cz + d and D_z = (3a/Λ)E.
fn type_d_key_function(a: C64, b: C64, cc: C64, d: C64, lambda: C64) -> String {
    let l = lambda;
    let t4 = -a * a * 3.0 / (l * 4.0);
    let t3c = a * b / l;
    let t3x = a / 2.0;
    let t2c = -b / 2.0;
    let t2x = -a * cc * 3.0 / (l * 2.0);
    let t1x2 = a * d * 3.0 / l;
    let t1x = cc / 2.0;
    let t0 = -d / 2.0;
    // q-independent term that makes the hyperheavenly residual vanish
    let g = (cc * cc - b * d * 4.0) / 12.0;
    format!(
        "{}*y^4/x + ({} + {}/x)*y^3 + (x^2/4 - {}/(12*x) + {} + {}*x)*y^2 + ({}*x^2 + {}*x)*y + {}*x^2 + {}",
        lit(t4),
        lit(t3c),
        lit(t3x),
        lit(l),
        lit(t2c),
        lit(t2x),
        lit(t1x2),
        lit(t1x),
        lit(t0),
        lit(g)
    )
}

impl MetricField for Family {
    fn chart(&self) -> Chart {
        self.id().chart()
    }

    fn tetrad(&self, pt: &JetPoint, order: usize) -> GeoResult<Tetrad> {
        walker_tetrad(self, pt, order)
    }
}

impl WalkerField for Family {
    fn walker(&self, pt: &JetPoint, order: usize) -> GeoResult<WalkerJets> {
        expect_chart(pt, self.chart())?;
        let n = order;
        match &self.model {
            Model::Key { key, .. } => key.walker(pt, n),
            Model::Ed { e, dz } => {
                let [q, _, x, z] = lift_all(pt, n + 2)?;
                let ej = e.eval(&q, &z)?;
                let ezz = ej.diff(3).diff(3);
                let dzj = dz.eval(&q.truncate(n + 1), &z.truncate(n + 1))?;
                let dzz = dzj.diff(3);
                let (a, qq, b) = walker_from_ed(
                    &x.truncate(n),
                    &z.truncate(n),
                    &ej.truncate(n),
                    &ezz,
                    &dzj.truncate(n),
                    &dzz,
                    self.lambda,
                );
                let y = -(x.truncate(n + 1) * z.truncate(n + 1));
                Ok(WalkerJets { a, q: qq, b, y })
            }
            Model::Profile(m) => self.profile_walker(m, pt, n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::values;

    fn pt(chart: Chart, v: [f64; 4]) -> JetPoint {
        JetPoint::real(chart, v).unwrap()
    }

    fn cpt(chart: Chart, v: [(f64, f64); 4]) -> JetPoint {
        JetPoint::new(chart, v.map(|(a, b)| C64::new(a, b))).unwrap()
    }

    fn family(id: FamilyId) -> Family {
        FamilySpec::new(id).build().unwrap()
    }

    #[test]
    fn hh_examples() {
        let p = pt(Chart::Y, [0.3, 0.1, 1.0, 0.7]);
        let w4 = KeyFunctionSpec::parse("x^4", c(0.0)).unwrap();
        assert!((w4.hh_residual(&p).unwrap() - c(-3.0)).norm() < 1e-12);
        let reference = KeyFunctionSpec::parse("x^2*y^2/4 - 3*y^2/(12*x)", c(3.0)).unwrap();
        let q = cpt(Chart::Y, [(0.4, 0.2), (0.1, 0.0), (1.3, -0.4), (0.6, 0.9)]);
        assert!(reference.hh_residual(&q).unwrap().norm() < 1e-12);
        // a g(q) term shifts the residual by −3g
        let with_g = KeyFunctionSpec::parse("x^2*y^2/4 - 3*y^2/(12*x) + q^2", c(3.0)).unwrap();
        let r = with_g.hh_residual(&q).unwrap();
        assert!((r + c(3.0) * q.coords[0] * q.coords[0]).norm() < 1e-12);
    }

    #[test]
    fn abq_simple_key_functions() {
        let p = pt(Chart::Y, [0.3, 0.1, 1.2, 0.7]);
        let zero = KeyFunctionSpec::parse("0", c(3.0)).unwrap();
        let (a, q, b) = zero.abqs(&p, 1).unwrap();
        assert!((a.value() - c(1.2f64.powi(3) + 0.5)).norm() < 1e-13);
        assert!(q.max_abs() < 1e-15 && b.max_abs() < 1e-15);
        let quarter = KeyFunctionSpec::parse("x^2*y^2/4", c(0.0)).unwrap();
        let (a, _, _) = quarter.abqs(&p, 0).unwrap();
        assert!((a.value() - c(0.5 * 1.2f64.powi(3))).norm() < 1e-13);
    }

    #[test]
    fn middle_triplet_vanishes_for_key_functions() {
        let key = KeyFunctionSpec::parse("q*x^3*y - y^3/x + exp(q*y)*x^2 + sin(x*y)", c(2.0)).unwrap();
        let p = cpt(Chart::Y, [(0.4, 0.3), (0.2, 0.0), (1.1, 0.2), (0.7, -0.5)]);
        let (a, q, b) = key.abqs(&p, 2).unwrap();
        for r in middle_triplet_residuals(&a, &q, &b, p.x(), key.lambda) {
            assert!(r.norm() < 1e-10, "{r}");
        }
        // A = x³ alone is not of key-function form
        let [_, _, x, _] = lift_all(&p, 2).unwrap();
        let zero = x.lift_const(c(0.0));
        let r = middle_triplet_residuals(&(&x * &x * &x), &zero, &zero, p.x(), c(1.0));
        assert!((r[0] + c(2.0)).norm() < 1e-12);
    }

    #[test]
    fn type_d_pppp_matches_explicit_metric() {
        let f = FamilySpec::new(FamilyId::TypeDpppp)
            .with("c0", "1")
            .unwrap()
            .with("d0", "2")
            .unwrap()
            .build()
            .unwrap();
        let (l, c0, d0) = (3.0, 1.0, 2.0);
        for v in [[0.3, 0.7, 1.2, 0.5], [1.1, 0.2, 0.6, -0.8], [0.5, 0.5, 1.4, 1.3]] {
            let p = pt(Chart::Y, v);
            let (x, y) = (v[2], v[3]);
            let a = 9.0 * y * y / l - 3.0 * y + x.powi(3) / 2.0 + 3.0 * c0 * x * x / l + l / 3.0;
            let q = 6.0 * y.powi(3) / (l * x) - 3.0 * y * y / x + (x * x / 2.0 + l / (3.0 * x)) * y + 3.0 * d0 * x * x / l;
            let b = 3.0 * y.powi(4) / (l * x * x) - 2.0 * y.powi(3) / (x * x)
                + (x / 2.0 + l / (3.0 * x * x) - 3.0 * c0 / l) * y * y
                + (6.0 * d0 * x / l + c0) * y
                - d0 * x;
            let jets = f.walker(&p, 0).unwrap();
            assert!((jets.a.value() - c(a)).norm() < 1e-12);
            assert!((jets.q.value() - c(q)).norm() < 1e-12);
            assert!((jets.b.value() - c(b)).norm() < 1e-12);
            let g = values(&f.metric(&p, 0).unwrap());
            assert!(g.determinant().norm() > 1e-8);
            assert!(f.key_function().unwrap().hh_residual(&p).unwrap().norm() < 1e-11);
        }
    }

    #[test]
    fn type_d_ppmm_closed_form() {
        for b0 in [0.0, 1.0] {
            let f = FamilySpec::new(FamilyId::TypeDppmm)
                .with("b0", &b0.to_string())
                .unwrap()
                .build()
                .unwrap();
            let p = pt(Chart::Y, [0.4, 0.3, 0.9, 0.6]);
            let (x, y, l): (f64, f64, f64) = (0.9, 0.6, 3.0);
            let k = x.powi(3) / 2.0 + l / 3.0;
            let jets = f.walker(&p, 0).unwrap();
            assert!((jets.a.value() - c(k + b0 * x)).norm() < 1e-12);
            assert!((jets.q.value() - c((k + b0 * x) * y / x)).norm() < 1e-12);
            assert!((jets.b.value() - c(k * y * y / (x * x))).norm() < 1e-12);
        }
    }

    #[test]
    fn charts_agree_for_ed_families() {
        // (E, D) in the z-chart against the same data in the y-chart through y = −xz
        let f = FamilySpec::new(FamilyId::EdGeneric)
            .with("E", "q*z^3 + z^2")
            .unwrap()
            .with("Dz", "z^3 - q*z")
            .unwrap()
            .with("lambda", "2")
            .unwrap()
            .build()
            .unwrap();
        let (q0, p0, x0, z0) = (0.4, 0.3, 1.1, 0.7);
        let zp = pt(Chart::Z, [q0, p0, x0, z0]);
        let yp = pt(Chart::Y, [q0, p0, x0, -x0 * z0]);
        // W = x²y²/4 − Λy²/(12x) − x²E/2 − x³D with D = z⁴/4 − qz²/2
        let w = "x^2*y^2/4 - 2*y^2/(12*x) - x^2*(q*(-y/x)^3 + (y/x)^2)/2 - x^3*((y/x)^4/4 - q*(y/x)^2/2)";
        let key = KeyFunctionSpec::parse(w, c(2.0)).unwrap();
        let gz = values(&f.metric(&zp, 0).unwrap());
        let gy = values(&key.metric(&yp, 0).unwrap());
        // pull the y-chart metric back through y = −xz
        let mut jac = nalgebra::Matrix4::<C64>::identity();
        jac[(3, 2)] = c(-z0);
        jac[(3, 3)] = c(-x0);
        let pulled = jac.transpose() * gy * jac;
        assert!((pulled - gz).norm() < 1e-10, "{}", (pulled - gz).norm());
    }

    #[test]
    fn type_iii_ppmm_matches_partial_fractions() {
        let f = family(FamilyId::TypeIIIppmm);
        let Model::Profile(m) = &f.model else { panic!() };
        for (q, w) in [(0.5, 0.8), (1.2, 0.3), (0.4, 1.4)] {
            let z = f.profile_jet(m, c(q), c(w), 0).unwrap().value();
            let exact = -2.0 * ((1.0 / (q * q)) * (w / (q + w)).ln() + 1.0 / (q * (q + w)));
            assert!((z - c(exact)).norm() < 1e-10, "{z} vs {exact}");
        }
    }

    #[test]
    fn reduced_equations_hold_across_catalog() {
        let points = [
            [(0.4, 0.3), (0.2, 0.1), (1.1, 0.2), (0.7, 0.5)],
            [(1.2, 0.6), (0.9, 0.4), (0.6, 1.1), (1.3, 0.8)],
        ];
        for id in FamilyId::ALL {
            if id == FamilyId::GenericW {
                continue;
            }
            let f = family(id);
            for v in points {
                let p = cpt(id.chart(), v);
                let ed = f.ed_jets(&p, 4).unwrap().unwrap();
                let (r1, r2) = reduced_residuals(&ed);
                assert!(r1.norm() < 1e-9 && r2.norm() < 1e-9, "{id}: {r1} {r2}");
            }
        }
    }

    #[test]
    fn abel_and_liouville_identities() {
        let f = family(FamilyId::TypeIIpppp);
        let p = cpt(Chart::W, [(0.4, 0.3), (0.2, 0.1), (1.1, 0.2), (0.7, 0.5)]);
        assert!(f.abel_residual(&p).unwrap().unwrap().norm() < 1e-9);
        let fe = expr::parse_in("w^3 + 2*w", "w").unwrap();
        let qe = expr::parse_in("q^2 - q + 3", "q").unwrap();
        let r = liouville_residual(&fe, &qe, C64::new(0.7, 0.2), C64::new(1.1, -0.3)).unwrap();
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn identity_gauge_is_trivial() {
        let key = KeyFunctionSpec::parse("x^2*y^2/4 - y^2/(4*x) + q*y^3/x", c(3.0)).unwrap();
        let g = gauge_transform(&key, &Gauge::identity()).unwrap();
        let p = pt(Chart::Y, [0.3, 0.2, 1.1, 0.6]);
        let a = key.w_jet(&p, 2).unwrap();
        let b = g.w_jet(&p, 2).unwrap();
        assert!((a - b).max_abs() < 1e-13);
        let mut bad = Gauge::identity();
        bad.lambda0 = c(2.0);
        assert!(matches!(gauge_transform(&key, &bad), Err(FamilyError::GaugeRestriction(_))));
    }

    #[test]
    fn gauge_pullback_matches() {
        let key = KeyFunctionSpec::parse("x^2*y^2/4 - y^2/(4*x) + q*y^3/x + x*y", c(3.0)).unwrap();
        let gauge = Gauge::parse("0.2 + q + 0.1*q^2 + 0.05*q^3", "0.3*q - 0.2*q^2 + 0.1*q^3", "0.1 + 0.2*q^2", "0.4*q^3 - q").unwrap();
        let gk = gauge_transform(&key, &gauge).unwrap();
        for v in [[0.3, 0.2, 1.1, 0.6], [0.8, -0.4, 0.7, 1.2], [0.5, 0.9, 1.4, -0.3]] {
            let p = pt(Chart::Y, v);
            let fwd = gauge.forward(&p, 1).unwrap();
            let jac = nalgebra::Matrix4::<C64>::from_fn(|a, b| fwd[a].d(b));
            let pp = JetPoint::new(Chart::Y, fwd.clone().map(|j| j.value())).unwrap();
            let g = values(&key.metric(&p, 0).unwrap());
            let gp = values(&gk.metric(&pp, 0).unwrap());
            let pulled = jac.transpose() * gp * jac;
            assert!((pulled - g).norm() < 1e-9, "{}", (pulled - g).norm());
            // z' = (z − h_q)/f with σ = 0 checked through the y transformation
            let z = -v[3] / v[2];
            let f = 1.0 + 0.2 * v[0] + 0.15 * v[0] * v[0];
            let hq = 0.3 - 0.4 * v[0] + 0.3 * v[0] * v[0];
            let sigma = 0.1 + 0.2 * v[0] * v[0];
            let zp = -(fwd[3].value() - sigma) / fwd[2].value();
            assert!((zp - c((z - hq) / f)).norm() < 1e-12);
        }
    }

    #[test]
    fn parameters_are_validated() {
        assert!(FamilySpec::new(FamilyId::TypeDpppp).with("bogus", "1").is_err());
        let bad = FamilySpec::new(FamilyId::TypeN3d).with("alpha0", "0.5").unwrap();
        assert!(bad.build().is_err());
        let bad = FamilySpec::new(FamilyId::TypeDpppp).with("lambda", "0").unwrap();
        assert!(bad.build().is_err());
        assert_eq!("type-d-pppp".parse::<FamilyId>().unwrap(), FamilyId::TypeDpppp);
        assert_eq!("typeD-pppp".parse::<FamilyId>().unwrap(), FamilyId::TypeDpppp);
    }

    #[test]
    fn branch_cut_is_a_constraint() {
        let f = FamilySpec::new(FamilyId::TypeIIIppmm)
            .with("F", "sqrt(w)")
            .unwrap()
            .with("w0", "-1+0.01i")
            .unwrap()
            .build()
            .unwrap();
        let p = cpt(Chart::W, [(0.4, 0.0), (0.1, 0.0), (1.0, 0.0), (-1.0, -0.01)]);
        assert!(f.walker(&p, 0).is_err());
    }
}
