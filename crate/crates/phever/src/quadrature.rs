//! Adaptive Gauss-Kronrod quadrature for jet-valued integrands on complex paths.
//!
//! Profiles such as `Z(q, w) = ∫ f(q, s) ds` are returned as jets in `(q, w)`.
//! The q-derivatives come from integrating the q-jet of the integrand with one
//! common set of nodes, so the result is the exact q-jet of a single smooth
//! function of q. The w-derivatives come from the integrand at the endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use thiserror::Error;

use crate::jets::{Jet, JetError};

type C64 = Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Length of the parameter interval used for rays to 0 and ∞.
pub const RAY_LENGTH: f64 = 50.0;
pub const DEFAULT_MAX_DEPTH: usize = 40;
pub const DEFAULT_TOL: f64 = 1e-13;
const MAX_INTERVALS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: worst subinterval [{a}, {b}] has error {error:e} at depth {depth}")]
    NoConvergence {
        a: C64,
        b: C64,
        error: f64,
        depth: usize,
    },
    #[error("integrand jumps near {at} along the path (branch cut crossing?)")]
    Discontinuity { at: C64 },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Where the integration starts.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Base {
    /// Straight segment from this point to the endpoint.
    Point(C64),
    /// Ray from 0 to w, parametrized s = w e^{-τ}.
    ZeroRay,
    /// Ray from ∞ to w, parametrized s = w e^{τ}.
    InfinityRay,
}

impl Default for Base {
    fn default() -> Base {
        Base::Point(C64::new(1.0, 0.0))
    }
}

type Integrand = dyn Fn(&Jet, &Jet) -> Result<Jet, JetError> + Send + Sync;

/// `∫_base^w f(q, s) ds` as a function of (q, w).
pub struct IntegralProfile {
    integrand: Box<Integrand>,
    pub base: Base,
    pub tol: f64,
    pub max_depth: usize,
}

impl std::fmt::Debug for IntegralProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegralProfile")
            .field("base", &self.base)
            .field("tol", &self.tol)
            .field("max_depth", &self.max_depth)
            .finish()
    }
}

/// Result of integrating a profile.
#[derive(Debug, Clone)]
pub struct ProfileJet {
    /// Jet in (q, w): variable 0 is q, variable 1 is w.
    pub jet: Jet,
    pub error: f64,
    pub intervals: usize,
}

impl IntegralProfile {
    /// `integrand(q, s)` receives jets of equal shape and returns a jet of that shape.
    pub fn new<F>(integrand: F, base: Base) -> IntegralProfile
    where
        F: Fn(&Jet, &Jet) -> Result<Jet, JetError> + Send + Sync + 'static,
    {
        IntegralProfile {
            integrand: Box::new(integrand),
            base,
            tol: DEFAULT_TOL,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn integrand_at(&self, q: &Jet, s: &Jet) -> Result<Jet, JetError> {
        (self.integrand)(q, s)
    }

    fn path(&self, w: C64) -> Path {
        match self.base {
            Base::Point(a) => Path::Segment { a, b: w },
            Base::ZeroRay => Path::Zero { w },
            Base::InfinityRay => Path::Infinity { w },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Path {
    Segment { a: C64, b: C64 },
    Zero { w: C64 },
    Infinity { w: C64 },
}

impl Path {
    fn range(&self) -> (f64, f64) {
        match self {
            Path::Segment { .. } => (0.0, 1.0),
            _ => (0.0, RAY_LENGTH),
        }
    }

    /// Point s(t) and the factor ds/dt, signs folded in so the result is ∫_base^w.
    fn at(&self, t: f64) -> (C64, C64) {
        match *self {
            Path::Segment { a, b } => (a + (b - a) * t, b - a),
            Path::Zero { w } => {
                let s = w * (-t).exp();
                (s, s)
            }
            Path::Infinity { w } => {
                let s = w * t.exp();
                (s, -s)
            }
        }
    }
}

/// Integrate `f(q, w)` from the profile base to `w`; returns an order-`order` jet in (q, w).
pub fn integrate(
    p: &IntegralProfile,
    q: C64,
    w: C64,
    order: usize,
) -> Result<ProfileJet, QuadError> {
    let path = p.path(w);
    let qj = Jet::variable(1, order, 0, q)?;
    let eval = |t: f64| -> Result<Vec<C64>, QuadError> {
        let (s, ds) = path.at(t);
        let sj = qj.lift_const(s);
        let f = p.integrand_at(&qj, &sj)?;
        Ok(f.coeffs().iter().map(|c| c * ds).collect())
    };
    continuity_probe(&path, &eval)?;
    let (t0, t1) = path.range();
    let (values, error, intervals) = adaptive(&eval, t0, t1, p.tol, p.max_depth, &path)?;

    // assemble the (q, w) jet
    let mut out = Jet::zero(2, order)?;
    let mut coeffs = out.coeffs().to_vec();
    let layout = out.layout();
    for (k, v) in values.iter().enumerate() {
        let idx = layout.index_of(&[k as u8, 0]).expect("pure q monomial");
        coeffs[idx] = *v;
    }
    if order >= 1 {
        let q2 = Jet::variable(2, order - 1, 0, q)?;
        let w2 = Jet::variable(2, order - 1, 1, w)?;
        let f = p.integrand_at(&q2, &w2)?;
        for (k, alpha) in f.layout().monomials().iter().enumerate() {
            let m = alpha[1] as usize + 1;
            let idx = layout.index_of(&[alpha[0], m as u8]).expect("in range");
            coeffs[idx] = f.coeffs()[k] / m as f64;
        }
    }
    out = Jet::from_coeffs(2, order, coeffs)?;
    Ok(ProfileJet {
        jet: out,
        error,
        intervals,
    })
}

/// Plain vector-valued adaptive quadrature over the real interval [a, b].
pub fn integrate_real<F>(f: F, a: f64, b: f64, tol: f64) -> Result<(Vec<C64>, f64), QuadError>
where
    F: Fn(f64) -> Result<Vec<C64>, QuadError>,
{
    let path = Path::Segment {
        a: C64::new(a, 0.0),
        b: C64::new(b, 0.0),
    };
    let (v, e, _) = adaptive(&f, a, b, tol, DEFAULT_MAX_DEPTH, &path)?;
    Ok((v, e))
}

struct Piece {
    a: f64,
    b: f64,
    depth: usize,
    value: Vec<C64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(Vec<C64>, f64), QuadError>
where
    F: Fn(f64) -> Result<Vec<C64>, QuadError>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let n = fc.len();
    let mut kron: Vec<C64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<C64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let f1 = f(c - h * XGK[j])?;
        let f2 = f(c + h * XGK[j])?;
        for i in 0..n {
            let s = f1[i] + f2[i];
            kron[i] += s * WGK[j];
            if j % 2 == 1 {
                gauss[i] += s * WG[j / 2];
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..n {
        kron[i] *= h;
        gauss[i] *= h;
        err = err.max((kron[i] - gauss[i]).norm());
    }
    Ok((kron, err))
}

fn adaptive<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
    path: &Path,
) -> Result<(Vec<C64>, f64, usize), QuadError>
where
    F: Fn(f64) -> Result<Vec<C64>, QuadError>,
{
    let mut heap = BinaryHeap::new();
    let initial = 4;
    for k in 0..initial {
        let lo = a + (b - a) * k as f64 / initial as f64;
        let hi = a + (b - a) * (k + 1) as f64 / initial as f64;
        let (value, error) = gk15(f, lo, hi)?;
        heap.push(Piece {
            a: lo,
            b: hi,
            depth: 0,
            value,
            error,
        });
    }
    // running totals keep each refinement step O(1) in the number of pieces
    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    let mut running = sum_pieces(&heap);
    loop {
        let scale = running.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if total_err <= tol * scale.max(1.0) {
            // confirm against exact sums before trusting the running ones
            total_err = heap.iter().map(|p| p.error).sum();
            running = sum_pieces(&heap);
            let scale = running.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if total_err <= tol * scale.max(1.0) {
                let n = heap.len();
                return Ok((running, total_err, n));
            }
        }
        let worst = heap.pop().expect("nonempty");
        if worst.depth >= max_depth || heap.len() >= MAX_INTERVALS {
            return Err(QuadError::NoConvergence {
                a: path.at(worst.a).0,
                b: path.at(worst.b).0,
                error: worst.error,
                depth: worst.depth,
            });
        }
        total_err -= worst.error;
        for (r, v) in running.iter_mut().zip(&worst.value) {
            *r -= v;
        }
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(f, lo, hi)?;
            total_err += error;
            for (r, v) in running.iter_mut().zip(&value) {
                *r += v;
            }
            heap.push(Piece {
                a: lo,
                b: hi,
                depth: worst.depth + 1,
                value,
                error,
            });
        }
    }
}

fn sum_pieces(heap: &BinaryHeap<Piece>) -> Vec<C64> {
    let mut pieces: Vec<&Piece> = heap.iter().collect();
    // fixed summation order keeps results bit-reproducible
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let n = pieces.first().map_or(0, |p| p.value.len());
    let mut out = vec![C64::new(0.0, 0.0); n];
    for p in pieces {
        for (o, v) in out.iter_mut().zip(&p.value) {
            *o += v;
        }
    }
    out
}

/// Reject paths along which the integrand value jumps, which signals a branch
/// cut crossing that adaptive refinement would silently integrate through.
fn continuity_probe<F>(path: &Path, f: &F) -> Result<(), QuadError>
where
    F: Fn(f64) -> Result<Vec<C64>, QuadError>,
{
    const GRID: usize = 128;
    let (t0, t1) = path.range();
    let sample = |t: f64| -> Result<C64, QuadError> {
        let (_, ds) = path.at(t);
        let v = f(t)?[0];
        Ok(if ds.norm() > 0.0 { v / ds } else { v })
    };
    let ts: Vec<f64> = (0..=GRID)
        .map(|k| t0 + (t1 - t0) * k as f64 / GRID as f64)
        .collect();
    let vals: Vec<C64> = ts.iter().map(|&t| sample(t)).collect::<Result<_, _>>()?;
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    for i in 0..diffs.len() {
        let left = if i > 0 { diffs[i - 1] } else { 0.0 };
        let right = diffs.get(i + 1).copied().unwrap_or(0.0);
        if diffs[i] < 1e-6 * scale || diffs[i] <= 20.0 * (left + right) {
            continue;
        }
        // a genuine jump stays concentrated in one cell under refinement
        const FINE: usize = 64;
        let (a, b) = (ts[i], ts[i + 1]);
        let fine: Vec<C64> = (0..=FINE)
            .map(|k| sample(a + (b - a) * k as f64 / FINE as f64))
            .collect::<Result<_, _>>()?;
        let biggest = fine
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .fold(0.0, f64::max);
        if biggest > 0.5 * diffs[i] {
            return Err(QuadError::Discontinuity {
                at: path.at(0.5 * (a + b)).0,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn integrates_identity() {
        let p = IntegralProfile::new(|_q, s| Ok(s.clone()), Base::Point(c(0.0)));
        let r = integrate(&p, c(0.0), c(1.0), 0).unwrap();
        assert!((r.jet.value() - 0.5).norm() < 1e-14);
        assert!(r.error < 1e-14);
    }

    #[test]
    fn q_derivative_under_the_integral() {
        let p = IntegralProfile::new(
            |q, s| (q + s).powi(-2),
            Base::Point(c(1.0)),
        );
        let r = integrate(&p, c(0.0), c(2.0), 2).unwrap();
        let direct = IntegralProfile::new(|q, s| Ok((q + s).powi(-3)? * -2.0), Base::Point(c(1.0)));
        let d = integrate(&direct, c(0.0), c(2.0), 0).unwrap();
        assert!((r.jet.partial(&[1, 0]) - d.jet.value()).norm() < 1e-10);
        // fundamental theorem: Z_w is the integrand at the endpoint
        assert!((r.jet.partial(&[0, 1]) - 0.25).norm() < 1e-14);
        assert!((r.jet.partial(&[0, 2]) + 0.25).norm() < 1e-14);
        assert!((r.jet.partial(&[1, 1]) + 0.25).norm() < 1e-14);
    }

    #[test]
    fn partial_fraction_profile() {
        // -2 ∫_1^2 dw / (w (1 + w)^2) = -2 [ln(w/(1+w)) + 1/(1+w)]_1^2
        let p = IntegralProfile::new(
            |q, s| Ok(s.recip()?.scale(c(-2.0)) * (q + s).powi(-2)?),
            Base::Point(c(1.0)),
        );
        let r = integrate(&p, c(1.0), c(2.0), 1).unwrap();
        let anti = |w: f64| -2.0 * ((w / (1.0 + w)).ln() + 1.0 / (1.0 + w));
        assert!((r.jet.value() - (anti(2.0) - anti(1.0))).norm() < 1e-10);
    }

    #[test]
    fn additivity_and_linearity() {
        let f = |q: &Jet, s: &Jet| Ok((q * s).exp() + s.sin());
        let p1 = IntegralProfile::new(f, Base::Point(c(0.2)));
        let p2 = IntegralProfile::new(f, Base::Point(C64::new(0.9, 0.4)));
        let end = C64::new(1.3, -0.2);
        let whole = integrate(&p1, c(0.5), end, 2).unwrap();
        let first = integrate(&p1, c(0.5), C64::new(0.9, 0.4), 2).unwrap();
        let second = integrate(&p2, c(0.5), end, 2).unwrap();
        for a in [[0u8, 0], [1, 0], [2, 0]] {
            let sum = first.jet.partial(&a) + second.jet.partial(&a);
            assert!((whole.jet.partial(&a) - sum).norm() < 2e-12);
        }
        let g = IntegralProfile::new(move |q, s| Ok(((q * s).exp() + s.sin()) * 3.0), Base::Point(c(0.2)));
        let tripled = integrate(&g, c(0.5), end, 2).unwrap();
        for (a, b) in tripled.jet.coeffs().iter().zip(whole.jet.coeffs()) {
            assert!((a - b * 3.0).norm() < 1e-12);
        }
    }

    #[test]
    fn rays_to_zero_and_infinity() {
        // ∫_0^w s ds = w²/2
        let p = IntegralProfile::new(|_q, s| Ok(s.clone()), Base::ZeroRay);
        let w = C64::new(0.8, 0.3);
        let r = integrate(&p, c(0.0), w, 1).unwrap();
        assert!((r.jet.value() - w * w / 2.0).norm() < 1e-12);
        // ∫_∞^w s^-2 ds = -1/w
        let p = IntegralProfile::new(|_q, s| s.powi(-2), Base::InfinityRay);
        let r = integrate(&p, c(0.0), w, 1).unwrap();
        assert!((r.jet.value() + w.inv()).norm() < 1e-12);
    }

    #[test]
    fn branch_crossing_is_rejected() {
        // sqrt has its cut on the negative axis and this segment crosses it
        let p = IntegralProfile::new(|_q, s| s.sqrt(), Base::Point(C64::new(-1.0, -1.0)));
        let r = integrate(&p, c(0.0), C64::new(-1.3, 0.9), 0);
        assert!(matches!(r, Err(QuadError::Discontinuity { .. })), "{r:?}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = IntegralProfile {
            max_depth: 2,
            ..IntegralProfile::new(|_q, s| Ok((s * 400.0).sin()), Base::Point(c(0.0)))
        };
        assert!(matches!(
            integrate(&p, c(0.0), c(1.0), 0),
            Err(QuadError::NoConvergence { .. })
        ));
    }
}
