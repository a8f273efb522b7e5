//! Truncated multivariate Taylor jets over complex scalars.
//!
//! A [`Jet`] stores the Taylor coefficients of a function of up to four
//! variables around a fixed expansion point, up to a fixed total degree.
//! Coefficient `c_α` equals `∂^α f / α!`, so partial derivatives are exact up
//! to rounding. Storage is dense and graded: all monomials of degree 0, then
//! degree 1, and so on, each degree block in lexicographic order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest number of variables a jet may carry.
pub const MAX_VARS: usize = 4;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 16;
/// Relative distance to the negative real axis below which ln/sqrt/pow refuse to pick a branch.
pub const BRANCH_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular evaluation: {what} at value {value}")]
    Singular { what: &'static str, value: C64 },
    #[error("branch ambiguity: {func} argument {value} is within {guard:e} of the branch cut")]
    BranchAmbiguity {
        func: &'static str,
        value: C64,
        guard: f64,
    },
}

pub type JetResult<T> = Result<T, JetError>;

/// Monomial bookkeeping shared by all jets with the same (nvars, order).
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    order: usize,
    monos: Vec<[u8; MAX_VARS]>,
    degree: Vec<usize>,
    index: HashMap<[u8; MAX_VARS], usize>,
    // (i, j, k): monomial i times monomial j lands in slot k.
    mul: Vec<(u32, u32, u32)>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut monos = Vec::new();
        for d in 0..=order {
            let mut block = Vec::new();
            let mut cur = [0u8; MAX_VARS];
            compositions(nvars, d, 0, &mut cur, &mut block);
            monos.extend(block);
        }
        let degree: Vec<usize> = monos
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let index: HashMap<_, _> = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let mut mul = Vec::new();
        for (i, mi) in monos.iter().enumerate() {
            for (j, mj) in monos.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let mut s = [0u8; MAX_VARS];
                for v in 0..MAX_VARS {
                    s[v] = mi[v] + mj[v];
                }
                mul.push((i as u32, j as u32, index[&s] as u32));
            }
        }
        Layout {
            nvars,
            order,
            monos,
            degree,
            index,
            mul,
        }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn monomials(&self) -> &[[u8; MAX_VARS]] {
        &self.monos
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        let mut key = [0u8; MAX_VARS];
        for (k, a) in key.iter_mut().zip(alpha) {
            *k = *a;
        }
        self.index.get(&key).copied()
    }
}

fn compositions(nvars: usize, d: usize, pos: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
    if pos + 1 == nvars {
        cur[pos] = d as u8;
        out.push(*cur);
        cur[pos] = 0;
        return;
    }
    for k in (0..=d).rev() {
        cur[pos] = k as u8;
        compositions(nvars, d - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

fn layout(nvars: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(Layout::build(nvars, order)))
        .clone()
}

/// Number of coefficients of a jet: C(order + nvars, nvars).
pub fn coefficient_count(nvars: usize, order: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for k in 1..=nvars {
        num *= order + k;
        den *= k;
    }
    num / den
}

/// Which coordinate chart a point is expressed in. Coordinates are always
/// ordered (q, p, x, ξ) where ξ is y, z or w.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// (q, p, x, y): hyperheavenly coordinates.
    Y,
    /// (q, p, x, z) with z = -y/x.
    Z,
    /// (q, p, x, w) with z = Z(q, w).
    W,
}

impl Chart {
    pub fn coordinate_names(&self) -> [&'static str; 4] {
        match self {
            Chart::Y => ["q", "p", "x", "y"],
            Chart::Z => ["q", "p", "x", "z"],
            Chart::W => ["q", "p", "x", "w"],
        }
    }
}

/// A point in one of the family charts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetPoint {
    pub chart: Chart,
    pub coords: [C64; 4],
}

impl JetPoint {
    pub fn new(chart: Chart, coords: [C64; 4]) -> JetResult<JetPoint> {
        if coords[2].norm() == 0.0 {
            return Err(JetError::Singular {
                what: "coordinate x vanishes",
                value: coords[2],
            });
        }
        Ok(JetPoint { chart, coords })
    }

    pub fn real(chart: Chart, coords: [f64; 4]) -> JetResult<JetPoint> {
        JetPoint::new(chart, coords.map(|c| C64::new(c, 0.0)))
    }

    pub fn x(&self) -> C64 {
        self.coords[2]
    }
}

/// Identity function of coordinate `var_index` at `point`, as a 4-variable jet.
pub fn lift(point: &JetPoint, var_index: usize, order: usize) -> JetResult<Jet> {
    if var_index >= 4 {
        return Err(JetError::InvalidArgument(format!(
            "variable index {var_index} out of range 0..4"
        )));
    }
    Jet::variable(4, order, var_index, point.coords[var_index])
}

/// All four coordinate lifts at `point`.
pub fn lift_all(point: &JetPoint, order: usize) -> JetResult<[Jet; 4]> {
    Ok([
        lift(point, 0, order)?,
        lift(point, 1, order)?,
        lift(point, 2, order)?,
        lift(point, 3, order)?,
    ])
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars
            && self.layout.order == other.layout.order
            && self.coeffs == other.coeffs
    }
}

fn check_shape(nvars: usize, order: usize) -> JetResult<()> {
    if nvars == 0 || nvars > MAX_VARS {
        return Err(JetError::InvalidArgument(format!(
            "nvars must be in 1..={MAX_VARS}, got {nvars}"
        )));
    }
    if order > MAX_ORDER {
        return Err(JetError::InvalidArgument(format!(
            "order must be at most {MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

impl Jet {
    pub fn zero(nvars: usize, order: usize) -> JetResult<Jet> {
        check_shape(nvars, order)?;
        let layout = layout(nvars, order);
        let coeffs = vec![C64::new(0.0, 0.0); layout.len()];
        Ok(Jet { layout, coeffs })
    }

    pub fn constant(nvars: usize, order: usize, value: C64) -> JetResult<Jet> {
        let mut j = Jet::zero(nvars, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// Identity function of variable `var`, expanded at `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: C64) -> JetResult<Jet> {
        if var >= nvars {
            return Err(JetError::InvalidArgument(format!(
                "variable index {var} out of range 0..{nvars}"
            )));
        }
        let mut j = Jet::constant(nvars, order, value)?;
        if order >= 1 {
            let mut alpha = [0u8; MAX_VARS];
            alpha[var] = 1;
            let k = j.layout.index_of(&alpha).expect("degree-1 monomial");
            j.coeffs[k] = C64::new(1.0, 0.0);
        }
        Ok(j)
    }

    /// Build a jet from raw coefficients in layout order.
    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<C64>) -> JetResult<Jet> {
        check_shape(nvars, order)?;
        let layout = layout(nvars, order);
        if coeffs.len() != layout.len() {
            return Err(JetError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { layout, coeffs })
    }

    /// Constant jet with the same shape as `self`.
    pub fn lift_const(&self, value: C64) -> Jet {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of the monomial with exponents `alpha` (zero above the order).
    pub fn coeff(&self, alpha: &[u8]) -> C64 {
        match self.layout.index_of(alpha) {
            Some(k) if alpha.len() <= self.nvars() || alpha[self.nvars()..].iter().all(|&a| a == 0) => {
                self.coeffs[k]
            }
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Mixed partial derivative ∂^α f at the expansion point.
    pub fn partial(&self, alpha: &[u8]) -> C64 {
        let fact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
        self.coeff(alpha) * fact
    }

    /// First partial derivative in slot `var` at the expansion point.
    pub fn d(&self, var: usize) -> C64 {
        let mut alpha = [0u8; MAX_VARS];
        alpha[var] = 1;
        self.partial(&alpha[..self.nvars()])
    }

    /// The jet of ∂f/∂(var); its order is one less.
    pub fn diff(&self, var: usize) -> Jet {
        assert!(var < self.nvars(), "diff: variable out of range");
        let order = self.order().saturating_sub(1);
        let out_layout = layout(self.nvars(), order);
        let mut coeffs = vec![C64::new(0.0, 0.0); out_layout.len()];
        if self.order() > 0 {
            for (k, m) in out_layout.monos.iter().enumerate() {
                let mut up = *m;
                up[var] += 1;
                let src = self.layout.index[&up];
                coeffs[k] = self.coeffs[src] * (up[var] as f64);
            }
        }
        Jet {
            layout: out_layout,
            coeffs,
        }
    }

    /// Drop all coefficients above total degree `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let out_layout = layout(self.nvars(), order);
        let coeffs = self.coeffs[..out_layout.len()].to_vec();
        Jet {
            layout: out_layout,
            coeffs,
        }
    }

    /// Re-express the jet in `nvars` variables, variable `i` of `self` becoming variable `map[i]`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> JetResult<Jet> {
        if map.len() != self.nvars() || map.iter().any(|&m| m >= nvars) {
            return Err(JetError::InvalidArgument("embed: bad variable map".into()));
        }
        let mut out = Jet::zero(nvars, self.order())?;
        for (k, m) in self.layout.monos.iter().enumerate() {
            let mut t = [0u8; MAX_VARS];
            for i in 0..self.nvars() {
                t[map[i]] += m[i];
            }
            let dst = out.layout.index[&t];
            out.coeffs[dst] += self.coeffs[k];
        }
        Ok(out)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn same_shape(&self, other: &Jet) {
        assert!(
            self.nvars() == other.nvars() && self.order() == other.order(),
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.nvars(),
            self.order(),
            other.nvars(),
            other.order()
        );
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_const(&self, s: C64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        self.same_shape(other);
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for &(i, j, k) in &self.layout.mul {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    /// The jet minus its value (nilpotent part).
    fn nilpotent(&self) -> Jet {
        let mut n = self.clone();
        n.coeffs[0] = C64::new(0.0, 0.0);
        n
    }

    /// Σ t_k (f - f₀)^k: composition with a univariate Taylor series.
    fn compose_series(&self, t: &[C64]) -> Jet {
        let h = self.nilpotent();
        let n = self.order().min(t.len() - 1);
        let mut acc = self.lift_const(t[n]);
        for k in (0..n).rev() {
            acc = acc.mul_jet(&h).add_const(t[k]);
        }
        acc
    }

    pub fn recip(&self) -> JetResult<Jet> {
        let a0 = self.value();
        if a0.norm() == 0.0 || !a0.is_finite() {
            return Err(JetError::Singular {
                what: "division by a jet with zero value",
                value: a0,
            });
        }
        let inv = a0.inv();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut p = inv;
        for _ in 0..=self.order() {
            t.push(p);
            p = -p * inv;
        }
        Ok(self.compose_series(&t))
    }

    pub fn div(&self, other: &Jet) -> JetResult<Jet> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let t: Vec<C64> = (0..=self.order())
            .map(|k| e / factorial(k))
            .collect();
        self.compose_series(&t)
    }

    fn branch_check(&self, func: &'static str) -> JetResult<C64> {
        let a0 = self.value();
        if a0.norm() == 0.0 || !a0.is_finite() {
            return Err(JetError::Singular {
                what: if func == "ln" { "logarithm of zero" } else { "fractional power of zero" },
                value: a0,
            });
        }
        if a0.re < 0.0 && a0.im.abs() < BRANCH_GUARD * a0.norm() {
            return Err(JetError::BranchAmbiguity {
                func,
                value: a0,
                guard: BRANCH_GUARD,
            });
        }
        Ok(a0)
    }

    /// Principal logarithm.
    pub fn ln(&self) -> JetResult<Jet> {
        let a0 = self.branch_check("ln")?;
        let inv = a0.inv();
        let mut t = vec![a0.ln()];
        let mut p = inv;
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(p * (sign / k as f64));
            p *= inv;
        }
        Ok(self.compose_series(&t))
    }

    /// Principal power f^α. Integer exponents use exact repeated products.
    pub fn pow(&self, alpha: C64) -> JetResult<Jet> {
        if alpha.im == 0.0 && alpha.re.fract() == 0.0 && alpha.re.abs() <= 64.0 {
            return self.powi(alpha.re as i32);
        }
        let a0 = self.branch_check("pow")?;
        let base = (alpha * a0.ln()).exp();
        let inv = a0.inv();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut binom = C64::new(1.0, 0.0);
        let mut p = base;
        for k in 0..=self.order() {
            t.push(binom * p);
            binom = binom * (alpha - k as f64) / (k as f64 + 1.0);
            p *= inv;
        }
        Ok(self.compose_series(&t))
    }

    pub fn sqrt(&self) -> JetResult<Jet> {
        let a0 = self.branch_check("sqrt")?;
        let mut j = self.pow(C64::new(0.5, 0.0))?;
        j.coeffs[0] = a0.sqrt();
        Ok(j)
    }

    pub fn powi(&self, n: i32) -> JetResult<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = self.lift_const(C64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Ok(result)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [s, c, -s, -c];
        let t: Vec<C64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&t)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [c, -s, -c, s];
        let t: Vec<C64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&t)
    }

    /// Substitute jets for the variables: returns f(args₀, …, argsₙ₋₁).
    ///
    /// `self` must be expanded at the point given by the argument values. The
    /// result has the argument shape, truncated to `min(self.order, args order)`.
    pub fn compose(&self, args: &[Jet]) -> JetResult<Jet> {
        if args.len() != self.nvars() {
            return Err(JetError::InvalidArgument(format!(
                "compose: expected {} arguments, got {}",
                self.nvars(),
                args.len()
            )));
        }
        let order = args[0].order().min(self.order());
        let nv = args[0].nvars();
        let args: Vec<Jet> = args
            .iter()
            .map(|a| {
                assert_eq!(a.nvars(), nv, "compose: arguments must share a layout");
                a.truncate(order).nilpotent()
            })
            .collect();
        let one = Jet::constant(nv, order, C64::new(1.0, 0.0))?;
        // powers[v][e] = (arg_v - arg_v0)^e
        let mut powers: Vec<Vec<Jet>> = Vec::with_capacity(args.len());
        for a in &args {
            let mut pw = vec![one.clone()];
            for e in 1..=order {
                let next = pw[e - 1].mul_jet(a);
                pw.push(next);
            }
            powers.push(pw);
        }
        let mut out = Jet::zero(nv, order)?;
        for (k, m) in self.layout.monos.iter().enumerate() {
            if self.layout.degree[k] > order {
                break;
            }
            let c = self.coeffs[k];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut term = powers[0][m[0] as usize].clone();
            for v in 1..self.nvars() {
                if m[v] > 0 {
                    term = term.mul_jet(&powers[v][m[v] as usize]);
                }
            }
            for (o, t) in out.coeffs.iter_mut().zip(&term.coeffs) {
                *o += c * t;
            }
        }
        Ok(out)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    a.same_shape(b);
    Jet {
        layout: a.layout.clone(),
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
    }
});
binop!(Sub, sub, |a, b| {
    a.same_shape(b);
    Jet {
        layout: a.layout.clone(),
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
    }
});
binop!(Mul, mul, |a, b| a.mul_jet(b));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: C64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: C64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<C64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: C64) -> Jet {
        self.add_const(rhs)
    }
}

impl Add<C64> for Jet {
    type Output = Jet;
    fn add(self, rhs: C64) -> Jet {
        self.add_const(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_const(C64::new(rhs, 0.0))
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_const(C64::new(rhs, 0.0))
    }
}

/// Shorthand for a real complex number.
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
