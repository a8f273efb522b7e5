//! Curvature from metric jets: Christoffel symbols, Riemann, Ricci, Weyl and
//! the self-dual / anti-self-dual Weyl coefficients in a null tetrad.
//!
//! Index layout is `(a, b, c, d)` row-major over the chart coordinates
//! `(q, p, x, ξ)`. The Riemann tensor is
//! `R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb`
//! and Ricci is `R_bd = R^a_bad`. Which sign and which 2-form pairing give the
//! coefficients used by the catalog is fixed by [`calibrate`].

use std::fmt;
use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::jets::{Chart, Jet, JetError, JetPoint};
use crate::quadrature::QuadError;

type C64 = Complex64;

pub type JetMatrix = [[Jet; 4]; 4];
pub type Tensor3 = [[[C64; 4]; 4]; 4];
pub type Tensor4 = [[[[C64; 4]; 4]; 4]; 4];

/// Committed calibration, produced by [`calibrate`].
pub const EMBEDDED_CALIBRATION: &str = include_str!("../calibration/conventions.txt");
pub const CALIBRATION_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate metric: det g = {det}")]
    Degenerate { det: C64 },
    #[error("metric field provides no tetrad")]
    NoTetrad,
    #[error("family constraint violated: {constraint} (|value| = {value:e})")]
    Constraint { constraint: String, value: f64 },
    #[error("calibrated conventions required")]
    CalibrationRequired,
    #[error("calibration ambiguous: {} candidates survive: {}", survivors.len(), survivors.join("; "))]
    CalibrationAmbiguous { survivors: Vec<String> },
    #[error("calibration failed: no candidate reproduces the anchors")]
    CalibrationEmpty,
    #[error("calibration file line {line}: {message}")]
    CalibrationFile { line: usize, message: String },
    #[error("cannot read calibration file {path}: {message}")]
    CalibrationIo { path: String, message: String },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

pub type GeoResult<T> = Result<T, GeometryError>;

/// Null coframe: `rows[i][a] = e^{i+1}_a`. The metric is
/// `g = e¹e² + e²e¹ + e³e⁴ + e⁴e³`.
#[derive(Debug, Clone)]
pub struct Tetrad {
    pub rows: JetMatrix,
}

impl Tetrad {
    pub fn metric(&self) -> JetMatrix {
        let e = &self.rows;
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                &e[0][a] * &e[1][b] + &e[1][a] * &e[0][b] + &e[2][a] * &e[3][b] + &e[3][a] * &e[2][b]
            })
        })
    }

    pub fn values(&self) -> Matrix4<C64> {
        Matrix4::from_fn(|i, a| self.rows[i][a].value())
    }
}

/// The Walker-form coefficient jets at a point, in the chart of the field.
///
/// `y` is the hyperheavenly coordinate y as a function of the chart
/// coordinates (`y = ξ` in the y-chart). It must carry one more order than
/// `a`, `q`, `b` because the coframe contains `dy`.
#[derive(Debug, Clone)]
pub struct WalkerJets {
    pub a: Jet,
    pub q: Jet,
    pub b: Jet,
    pub y: Jet,
}

impl WalkerJets {
    /// `e³ = x⁻²dp, e¹ = −x⁻²dq, e⁴ = −dx + A dp − Q dq, e² = −dy + Q dp − B dq`.
    pub fn tetrad(&self, x: &Jet) -> GeoResult<Tetrad> {
        let zero = self.a.lift_const(C64::new(0.0, 0.0));
        let one = self.a.lift_const(C64::new(1.0, 0.0));
        let xm2 = x.truncate(self.a.order()).powi(-2)?;
        let dy: [Jet; 4] = std::array::from_fn(|k| self.y.diff(k));
        let rows = [
            [-&xm2, zero.clone(), zero.clone(), zero.clone()],
            [
                -(&dy[0] + &self.b),
                &self.q - &dy[1],
                -&dy[2],
                -&dy[3],
            ],
            [zero.clone(), xm2, zero.clone(), zero.clone()],
            [-&self.q, self.a.clone(), -&one, zero],
        ];
        Ok(Tetrad { rows })
    }
}

/// A metric given by jets of its components (and, for Walker metrics, its tetrad).
pub trait MetricField: Send + Sync {
    fn chart(&self) -> Chart;

    /// Tetrad jets of the given order at `pt`.
    fn tetrad(&self, pt: &JetPoint, order: usize) -> GeoResult<Tetrad>;

    /// Metric component jets of the given order at `pt`.
    fn metric(&self, pt: &JetPoint, order: usize) -> GeoResult<JetMatrix> {
        Ok(self.tetrad(pt, order)?.metric())
    }
}

/// y-chart Walker coefficients from a key function:
/// `A = −xW_yy + μ₀x³ + Λ/6`, `Q = xW_xy − W_y`, `B = −xW_xx + 2W_x`.
///
/// `w` is a 4-variable jet in (q, p, x, y); the result has two orders fewer.
pub fn abq_from_key(w: &Jet, x: &Jet, mu0: C64, lambda: C64) -> (Jet, Jet, Jet) {
    let n = w.order().saturating_sub(2);
    let x = x.truncate(n);
    let wx = w.diff(2);
    let wy = w.diff(3);
    let wxx = wx.diff(2);
    let wxy = wx.diff(3);
    let wyy = wy.diff(3);
    let x3 = &x * &x * &x;
    let a = -(&x * &wyy) + x3 * mu0 + lambda / 6.0;
    let q = &x * &wxy - wy.truncate(n);
    let b = -(&x * &wxx) + wx.truncate(n) * 2.0;
    (a, q, b)
}

fn const_matrix(template: &Jet, m: &Matrix4<C64>) -> JetMatrix {
    std::array::from_fn(|i| std::array::from_fn(|j| template.lift_const(m[(i, j)])))
}

fn matmul(a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = &a[i][0] * &b[0][j];
            for k in 1..4 {
                acc = acc + &a[i][k] * &b[k][j];
            }
            acc
        })
    })
}

pub fn values(m: &JetMatrix) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| m[i][j].value())
}

/// Numeric inverse with a relative determinant guard.
pub fn inverse_value(m: &Matrix4<C64>) -> GeoResult<Matrix4<C64>> {
    let det = m.determinant();
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(det.norm() > 1e-13 * scale.powi(4)) {
        return Err(GeometryError::Degenerate { det });
    }
    m.try_inverse().ok_or(GeometryError::Degenerate { det })
}

/// Jet of the inverse matrix: `Σ_k (−G h)^k G` with `G` the inverse value and
/// `h` the nilpotent part, which terminates at the jet order.
pub fn inverse_jets(m: &JetMatrix) -> GeoResult<JetMatrix> {
    let g0 = values(m);
    let ginv = inverse_value(&g0)?;
    let template = &m[0][0];
    let big_g = const_matrix(template, &ginv);
    let h: JetMatrix = std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].add_const(-g0[(i, j)])));
    let minus_gh: JetMatrix = {
        let gh = matmul(&big_g, &h);
        std::array::from_fn(|i| std::array::from_fn(|j| -&gh[i][j]))
    };
    let mut term = big_g.clone();
    let mut sum = big_g;
    for _ in 0..template.order() {
        term = matmul(&minus_gh, &term);
        for i in 0..4 {
            for j in 0..4 {
                sum[i][j] = &sum[i][j] + &term[i][j];
            }
        }
    }
    Ok(sum)
}

/// Christoffel symbols of the second kind as jets one order below the metric.
pub fn christoffel_jets(g: &JetMatrix) -> GeoResult<[[[Jet; 4]; 4]; 4]> {
    let n = g[0][0].order();
    if n == 0 {
        return Err(GeometryError::Jet(JetError::InvalidArgument(
            "Christoffel symbols need metric jets of order at least 1".into(),
        )));
    }
    let ginv = inverse_jets(&g.clone().map(|r| r.map(|j| j.truncate(n - 1))))?;
    let dg: [[[Jet; 4]; 4]; 4] =
        std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| g[a][b].diff(c))));
    // first kind: Γ_dbc = ½(∂_b g_dc + ∂_c g_db − ∂_d g_bc)
    let first: [[[Jet; 4]; 4]; 4] = std::array::from_fn(|d| {
        std::array::from_fn(|b| {
            std::array::from_fn(|c| (&dg[d][c][b] + &dg[d][b][c] - &dg[b][c][d]) * 0.5)
        })
    });
    Ok(std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            std::array::from_fn(|c| {
                let mut acc = &ginv[a][0] * &first[0][b][c];
                for d in 1..4 {
                    acc = acc + &ginv[a][d] * &first[d][b][c];
                }
                acc
            })
        })
    }))
}

/// Γ^a_bc at `pt`.
pub fn christoffel(field: &dyn MetricField, pt: &JetPoint) -> GeoResult<Tensor3> {
    let g = field.metric(pt, 1)?;
    let gam = christoffel_jets(&g)?;
    Ok(gam.map(|r| r.map(|s| s.map(|j| j.value()))))
}

/// Riemann tensor, Ricci tensor and scalar curvature in the internal convention.
#[derive(Debug, Clone)]
pub struct RiemannData {
    pub g: Matrix4<C64>,
    pub ginv: Matrix4<C64>,
    pub gamma: Tensor3,
    /// `R^a_bcd`
    pub riemann: Tensor4,
    /// `R_bd = R^a_bad`
    pub ricci: Matrix4<C64>,
    /// `g^bd R_bd`
    pub scalar: C64,
}

impl RiemannData {
    /// `R_abcd = g_ae R^e_bcd`
    pub fn lowered(&self) -> Tensor4 {
        let mut out = [[[[C64::new(0.0, 0.0); 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        out[a][b][c][d] = (0..4).map(|e| self.g[(a, e)] * self.riemann[e][b][c][d]).sum();
                    }
                }
            }
        }
        out
    }

    /// Weyl tensor with all indices down.
    pub fn weyl(&self) -> Tensor4 {
        let rl = self.lowered();
        let g = &self.g;
        let ric = &self.ricci;
        let r = self.scalar;
        let mut out = rl;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        out[a][b][c][d] -= (g[(a, c)] * ric[(b, d)] - g[(a, d)] * ric[(b, c)]
                            - g[(b, c)] * ric[(a, d)]
                            + g[(b, d)] * ric[(a, c)])
                            * 0.5;
                        out[a][b][c][d] += r / 6.0 * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)]);
                    }
                }
            }
        }
        out
    }
}

fn riemann_from_metric(g: &JetMatrix) -> GeoResult<RiemannData> {
    let gam = christoffel_jets(g)?;
    let gv = values(g);
    let ginv = inverse_value(&gv)?;
    let gamma: Tensor3 = gam.clone().map(|r| r.map(|s| s.map(|j| j.value())));
    let mut riemann = [[[[C64::new(0.0, 0.0); 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = gam[a][d][b].d(c) - gam[a][c][b].d(d);
                    for e in 0..4 {
                        v += gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b];
                    }
                    riemann[a][b][c][d] = v;
                }
            }
        }
    }
    let ricci = Matrix4::from_fn(|b, d| (0..4).map(|a| riemann[a][b][a][d]).sum());
    let scalar = (0..4)
        .flat_map(|b| (0..4).map(move |d| (b, d)))
        .map(|(b, d)| ginv[(b, d)] * ricci[(b, d)])
        .sum();
    Ok(RiemannData {
        g: gv,
        ginv,
        gamma,
        riemann,
        ricci,
        scalar,
    })
}

pub fn riemann_ricci(field: &dyn MetricField, pt: &JetPoint) -> GeoResult<RiemannData> {
    riemann_from_metric(&field.metric(pt, 2)?)
}

/// Which null 2-forms carry the self-dual part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdClass {
    /// `{E1∧E3, E2∧E4, E1∧E2 + E3∧E4}`
    P,
    /// `{E1∧E4, E2∧E3, E1∧E2 − E3∧E4}`
    M,
}

impl SdClass {
    fn key(&self) -> &'static str {
        match self {
            SdClass::P => "13-24",
            SdClass::M => "14-23",
        }
    }

    fn other(&self) -> SdClass {
        match self {
            SdClass::P => SdClass::M,
            SdClass::M => SdClass::P,
        }
    }

    /// (U, V, X) as bivector coefficient lists over frame index pairs.
    fn forms(&self) -> [Vec<(usize, usize, f64)>; 3] {
        match self {
            SdClass::P => [
                vec![(0, 2, 1.0)],
                vec![(1, 3, 1.0)],
                vec![(0, 1, 1.0), (2, 3, 1.0)],
            ],
            SdClass::M => [
                vec![(0, 3, 1.0)],
                vec![(1, 2, 1.0)],
                vec![(0, 1, 1.0), (2, 3, -1.0)],
            ],
        }
    }
}

/// Sign, pairing and normalization choices that turn raw Weyl frame components
/// into the coefficients C⁽ⁱ⁾ and Ċ⁽ⁱ⁾.
///
/// For a class (U, V, X) the unreversed coefficients are
/// `(n_null C(V,V), n_mix C(V,X), n_mid C(U,V), n_mix C(U,X), n_null C(U,U))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConventionSet {
    pub ricci_sign: f64,
    pub sd_class: SdClass,
    pub reversed: bool,
    pub scale_null: f64,
    pub scale_mid: f64,
    pub scale_mix: f64,
}

impl fmt::Display for ConventionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ricci_sign={} sd_class={} reversed={} scale_null={} scale_mid={} scale_mix={}",
            self.ricci_sign,
            self.sd_class.key(),
            self.reversed,
            self.scale_null,
            self.scale_mid,
            self.scale_mix
        )
    }
}

impl ConventionSet {
    /// Every candidate examined by [`calibrate`].
    pub fn candidates() -> Vec<ConventionSet> {
        const SCALES: [f64; 6] = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5];
        let mut out = Vec::new();
        for ricci_sign in [1.0, -1.0] {
            for sd_class in [SdClass::P, SdClass::M] {
                for reversed in [false, true] {
                    for scale_null in SCALES {
                        for scale_mid in SCALES {
                            for scale_mix in SCALES {
                                out.push(ConventionSet {
                                    ricci_sign,
                                    sd_class,
                                    reversed,
                                    scale_null,
                                    scale_mid,
                                    scale_mix,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// The committed calibration.
    pub fn embedded() -> ConventionSet {
        ConventionSet::parse(EMBEDDED_CALIBRATION).expect("embedded calibration is valid")
    }

    pub fn load(path: &Path) -> GeoResult<ConventionSet> {
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::CalibrationIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        ConventionSet::parse(&text)
    }

    /// Canonical key-value serialization.
    pub fn to_text(&self) -> String {
        format!(
            "# Curvature conventions, produced by `phever calibrate`.\n\
             schema = {CALIBRATION_SCHEMA}\n\
             ricci_sign = {}\n\
             sd_class = {}\n\
             reversed = {}\n\
             scale_null = {}\n\
             scale_mid = {}\n\
             scale_mix = {}\n",
            self.ricci_sign,
            self.sd_class.key(),
            self.reversed,
            self.scale_null,
            self.scale_mid,
            self.scale_mix
        )
    }

    pub fn parse(text: &str) -> GeoResult<ConventionSet> {
        let mut fields: std::collections::HashMap<&str, (usize, &str)> = Default::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(GeometryError::CalibrationFile {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            let k = k.trim();
            if fields.insert(k, (i + 1, v.trim())).is_some() {
                return Err(GeometryError::CalibrationFile {
                    line: i + 1,
                    message: format!("duplicate key `{k}`"),
                });
            }
        }
        let last_line = text.lines().count().max(1);
        let get = |k: &str| {
            fields.get(k).copied().ok_or(GeometryError::CalibrationFile {
                line: last_line,
                message: format!("missing key `{k}`"),
            })
        };
        let num = |k: &str| -> GeoResult<f64> {
            let (line, v) = get(k)?;
            v.parse::<f64>().map_err(|_| GeometryError::CalibrationFile {
                line,
                message: format!("`{k}` is not a number: {v}"),
            })
        };
        let (line, schema) = get("schema")?;
        if schema != CALIBRATION_SCHEMA.to_string() {
            return Err(GeometryError::CalibrationFile {
                line,
                message: format!("unsupported schema {schema}"),
            });
        }
        let (line, class) = get("sd_class")?;
        let sd_class = match class {
            "13-24" => SdClass::P,
            "14-23" => SdClass::M,
            other => {
                return Err(GeometryError::CalibrationFile {
                    line,
                    message: format!("unknown sd_class `{other}`"),
                })
            }
        };
        let (line, rev) = get("reversed")?;
        let reversed = rev.parse::<bool>().map_err(|_| GeometryError::CalibrationFile {
            line,
            message: format!("`reversed` must be true or false, got {rev}"),
        })?;
        let known = [
            "schema",
            "ricci_sign",
            "sd_class",
            "reversed",
            "scale_null",
            "scale_mid",
            "scale_mix",
        ];
        if let Some((k, (line, _))) = fields.iter().find(|(k, _)| !known.contains(k)) {
            return Err(GeometryError::CalibrationFile {
                line: *line,
                message: format!("unknown key `{k}`"),
            });
        }
        Ok(ConventionSet {
            ricci_sign: num("ricci_sign")?,
            sd_class,
            reversed,
            scale_null: num("scale_null")?,
            scale_mid: num("scale_mid")?,
            scale_mix: num("scale_mix")?,
        })
    }

    /// sha256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    fn coefficients(&self, frame: &Tensor4, class: SdClass) -> [C64; 5] {
        let [u, v, x] = class.forms();
        let pair = |s: &[(usize, usize, f64)], t: &[(usize, usize, f64)]| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for &(i, j, a) in s {
                for &(k, l, b) in t {
                    acc += frame[i][j][k][l] * (a * b);
                }
            }
            acc
        };
        let c = [
            pair(&v, &v) * self.scale_null,
            pair(&v, &x) * self.scale_mix,
            pair(&u, &v) * self.scale_mid,
            pair(&u, &x) * self.scale_mix,
            pair(&u, &u) * self.scale_null,
        ];
        if self.reversed {
            [c[4], c[3], c[2], c[1], c[0]]
        } else {
            c
        }
    }
}

/// Curvature snapshot at a point.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeylData {
    /// Scalar curvature in the calibrated sign.
    pub r: C64,
    /// Largest traceless Ricci frame component.
    pub cab_max: f64,
    /// Largest Riemann frame component, the scale for relative checks.
    pub riemann_scale: f64,
    /// Self-dual coefficients C⁽¹⁾..C⁽⁵⁾.
    pub c: [C64; 5],
    /// Anti-self-dual coefficients Ċ⁽¹⁾..Ċ⁽⁵⁾.
    pub cdot: [C64; 5],
}

/// Raw curvature at a point, before conventions are applied.
#[derive(Debug, Clone)]
pub struct FrameCurvature {
    pub scalar: C64,
    pub ricci_frame: Matrix4<C64>,
    pub riemann_frame: Tensor4,
    pub weyl_frame: Tensor4,
}

/// Contract each index of `t` with the frame vectors `E_i^a = frame[(a, i)]`.
pub fn to_frame(t: &Tensor4, frame: &Matrix4<C64>) -> Tensor4 {
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = [[[[C64::new(0.0, 0.0); 4]; 4]; 4]; 4];
        for i0 in 0..4 {
            for i1 in 0..4 {
                for i2 in 0..4 {
                    for i3 in 0..4 {
                        let idx = [i0, i1, i2, i3];
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..4 {
                            let mut src = idx;
                            src[slot] = a;
                            acc += cur[src[0]][src[1]][src[2]][src[3]] * frame[(a, idx[slot])];
                        }
                        next[i0][i1][i2][i3] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

pub fn frame_curvature(field: &dyn MetricField, pt: &JetPoint) -> GeoResult<FrameCurvature> {
    let tetrad = field.tetrad(pt, 2)?;
    let data = riemann_from_metric(&tetrad.metric())?;
    let frame = inverse_value(&tetrad.values())?;
    let ricci_frame = frame.transpose() * data.ricci * frame;
    Ok(FrameCurvature {
        scalar: data.scalar,
        ricci_frame,
        riemann_frame: to_frame(&data.lowered(), &frame),
        weyl_frame: to_frame(&data.weyl(), &frame),
    })
}

impl FrameCurvature {
    pub fn weyl_data(&self, conv: &ConventionSet) -> WeylData {
        let r = self.scalar * conv.ricci_sign;
        // frame metric: η_12 = η_34 = 1
        let mut eta = Matrix4::<C64>::zeros();
        for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            eta[(i, j)] = C64::new(1.0, 0.0);
        }
        let traceless = self.ricci_frame * C64::new(conv.ricci_sign, 0.0) - eta * (r / 4.0);
        let cab_max = traceless.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let riemann_scale = self
            .riemann_frame
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        WeylData {
            r,
            cab_max,
            riemann_scale,
            c: conv.coefficients(&self.weyl_frame, conv.sd_class),
            cdot: conv.coefficients(&self.weyl_frame, conv.sd_class.other()),
        }
    }
}

pub fn weyl_coefficients(
    field: &dyn MetricField,
    conv: Option<&ConventionSet>,
    pt: &JetPoint,
) -> GeoResult<WeylData> {
    let conv = conv.ok_or(GeometryError::CalibrationRequired)?;
    Ok(frame_curvature(field, pt)?.weyl_data(conv))
}

/// Reference space for calibration: key function `W = x²y²/4 − Λy²/(12x)`,
/// for which `A = x³/2 + Λ/3`, `Q = x²y/2 + Λy/(3x)`, `B = xy²/2 + Λy²/(3x²)`.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSpace {
    pub lambda: C64,
}

impl MetricField for ReferenceSpace {
    fn chart(&self) -> Chart {
        Chart::Y
    }

    fn tetrad(&self, pt: &JetPoint, order: usize) -> GeoResult<Tetrad> {
        let [_, _, x, y] = crate::jets::lift_all(pt, order + 2)?;
        let w = &x * &x * &y * &y * 0.25 - (&y * &y).div(&x)? * (self.lambda / 12.0);
        let (a, q, b) = abq_from_key(&w, &x, C64::new(1.0, 0.0), self.lambda);
        let jets = WalkerJets {
            a,
            q,
            b,
            y: y.truncate(order + 1),
        };
        jets.tetrad(&x)
    }
}

/// Fixed anchor points for calibration, in (q, p, x, y).
pub fn calibration_points() -> [[C64; 4]; 5] {
    let c = C64::new;
    [
        [c(0.3, 0.0), c(0.7, 0.0), c(1.2, 0.0), c(0.5, 0.0)],
        [c(0.5, 0.0), c(0.2, 0.0), c(0.8, 0.0), c(1.1, 0.0)],
        [c(1.1, 0.0), c(0.4, 0.0), c(1.4, 0.0), c(0.3, 0.0)],
        [c(0.4, 0.3), c(0.9, -0.2), c(0.7, 0.5), c(1.3, 0.1)],
        [c(0.6, -0.4), c(0.3, 0.6), c(1.1, -0.3), c(0.2, 0.9)],
    ]
}

pub const CALIBRATION_LAMBDA: f64 = 3.0;
pub const CALIBRATION_TOL: f64 = 1e-9;

/// Expected (R, C, Ċ) on the reference space.
pub fn calibration_anchors(lambda: C64, pt: &[C64; 4]) -> (C64, [C64; 5], [C64; 5]) {
    let (x, y) = (pt[2], pt[3]);
    let zero = C64::new(0.0, 0.0);
    (
        -lambda * 4.0,
        [zero, zero, -x * x * x * 2.0, zero, zero],
        [
            zero,
            zero,
            -lambda * 2.0 / 3.0,
            lambda * y / x * 2.0,
            -lambda * y * y / (x * x) * 4.0,
        ],
    )
}

fn rel_close(a: C64, b: C64, tol: f64, scale: f64) -> bool {
    (a - b).norm() <= tol * scale.max(b.norm()).max(1.0)
}

/// Does `conv` reproduce every anchor on the reference space?
pub fn candidate_matches(conv: &ConventionSet, raw: &[(FrameCurvature, [C64; 4])], lambda: C64) -> bool {
    raw.iter().all(|(fc, pt)| {
        let wd = fc.weyl_data(conv);
        let (r, c, cdot) = calibration_anchors(lambda, pt);
        let scale = c.iter().chain(&cdot).map(|v| v.norm()).fold(0.0, f64::max);
        rel_close(wd.r, r, CALIBRATION_TOL, lambda.norm())
            && wd.c.iter().zip(&c).all(|(a, b)| rel_close(*a, *b, CALIBRATION_TOL, scale))
            && wd.cdot.iter().zip(&cdot).all(|(a, b)| rel_close(*a, *b, CALIBRATION_TOL, scale))
    })
}

/// Select the unique convention set reproducing the anchors from `candidates`.
pub fn calibrate(candidates: &[ConventionSet]) -> GeoResult<ConventionSet> {
    let lambda = C64::new(CALIBRATION_LAMBDA, 0.0);
    let reference = ReferenceSpace { lambda };
    let raw = calibration_points()
        .iter()
        .map(|c| {
            let pt = JetPoint::new(Chart::Y, *c)?;
            Ok((frame_curvature(&reference, &pt)?, *c))
        })
        .collect::<GeoResult<Vec<_>>>()?;
    let survivors: Vec<&ConventionSet> = candidates
        .iter()
        .filter(|conv| candidate_matches(conv, &raw, lambda))
        .collect();
    match survivors.as_slice() {
        [] => Err(GeometryError::CalibrationEmpty),
        [one] => Ok(**one),
        many => Err(GeometryError::CalibrationAmbiguous {
            survivors: many.iter().map(|c| c.to_string()).collect(),
        }),
    }
}
