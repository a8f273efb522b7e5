//! A small expression language for user-supplied coefficient functions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?            right associative
//! atom    := number | number "i" | "i" | "pi" | ident
//!          | func "(" sum ")" | "pow" "(" sum "," sum ")" | "(" sum ")"
//! func    := exp | ln | sqrt | sin | cos
//! ```
//!
//! Numbers are decimal with an optional exponent. A number immediately followed
//! by `i` is an imaginary literal, so `0.5+2i` is a complex constant. An
//! expression from [`parse`] has at most one free variable; [`parse_vars`]
//! admits a fixed list of named variables.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::jets::{Jet, JetError};

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected one of {}", expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("expression is not constant: depends on `{0}`")]
    NotConstant(String),
    #[error(transparent)]
    Eval(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(C64),
    /// Index into the variable list of the expression.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed coefficient function.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    vars: Vec<String>,
    root: Node,
}

impl Expr {
    pub fn constant(value: C64) -> Expr {
        Expr {
            vars: Vec::new(),
            root: Node::Num(value),
        }
    }

    pub fn variable(&self) -> Option<&str> {
        self.vars.first().map(|s| s.as_str())
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn is_constant(&self) -> bool {
        first_var(&self.root).is_none()
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Result<C64, ExprError> {
        if let Some(i) = first_var(&self.root) {
            return Err(ExprError::NotConstant(self.vars[i].clone()));
        }
        let one = Jet::constant(1, 0, C64::new(0.0, 0.0))?;
        Ok(eval_node(&self.root, &one, &[])?.value())
    }

    /// Evaluate with the variable replaced by an arbitrary jet.
    pub fn eval_on(&self, arg: &Jet) -> Result<Jet, JetError> {
        eval_node(&self.root, arg, std::slice::from_ref(arg))
    }

    /// Evaluate with variable `i` replaced by `args[i]`; all jets share one shape.
    pub fn eval_multi(&self, args: &[Jet]) -> Result<Jet, JetError> {
        let template = args
            .first()
            .ok_or_else(|| JetError::InvalidArgument("no arguments".into()))?;
        eval_node(&self.root, template, args)
    }

    /// Plain complex value at `at`.
    pub fn eval(&self, at: C64) -> Result<C64, JetError> {
        let arg = Jet::constant(1, 0, at)?;
        Ok(self.eval_on(&arg)?.value())
    }
}

/// Univariate jet of `e` expanded at `at`.
pub fn eval_jet(e: &Expr, at: C64, order: usize) -> Result<Jet, JetError> {
    let arg = Jet::variable(1, order, 0, at)?;
    e.eval_on(&arg)
}

fn first_var(node: &Node) -> Option<usize> {
    match node {
        Node::Num(_) => None,
        Node::Var(i) => Some(*i),
        Node::Neg(a) | Node::Call(_, a) => first_var(a),
        Node::Bin(_, a, b) => first_var(a).or_else(|| first_var(b)),
    }
}

fn eval_node(node: &Node, t: &Jet, args: &[Jet]) -> Result<Jet, JetError> {
    Ok(match node {
        Node::Num(c) => t.lift_const(*c),
        Node::Var(i) => args
            .get(*i)
            .cloned()
            .ok_or_else(|| JetError::InvalidArgument(format!("missing argument {i}")))?,
        Node::Neg(a) => -eval_node(a, t, args)?,
        Node::Bin(op, a, b) => {
            let l = eval_node(a, t, args)?;
            match op {
                BinOp::Add => l + eval_node(b, t, args)?,
                BinOp::Sub => l - eval_node(b, t, args)?,
                BinOp::Mul => l * eval_node(b, t, args)?,
                BinOp::Div => l.div(&eval_node(b, t, args)?)?,
                BinOp::Pow => match constant_of(b) {
                    Some(alpha) => l.pow(alpha)?,
                    None => (eval_node(b, t, args)? * l.ln()?).exp(),
                },
            }
        }
        Node::Call(f, a) => {
            let v = eval_node(a, t, args)?;
            match f {
                Func::Exp => v.exp(),
                Func::Ln => v.ln()?,
                Func::Sqrt => v.sqrt()?,
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    })
}

/// Fold a variable-free subtree to its value.
fn constant_of(node: &Node) -> Option<C64> {
    match node {
        Node::Num(c) => Some(*c),
        Node::Var(_) => None,
        Node::Neg(a) => constant_of(a).map(|v| -v),
        Node::Bin(op, a, b) => {
            let (x, y) = (constant_of(a)?, constant_of(b)?);
            Some(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= 64.0 => {
                    x.powi(y.re as i32)
                }
                BinOp::Pow => x.powc(y),
            })
        }
        Node::Call(..) => None,
    }
}

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars: Vec::new(),
        allowed: None,
    };
    p.finish()
}

/// Parse an expression whose only admissible variable is `var`.
pub fn parse_in(text: &str, var: &str) -> Result<Expr, ExprError> {
    parse_vars(text, &[var])
}

/// Parse an expression in the named variables; `Node::Var(i)` refers to `vars[i]`.
pub fn parse_vars(text: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars: vars.iter().map(|s| s.to_string()).collect(),
        allowed: Some(vars),
    };
    p.finish()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: Vec<String>,
    allowed: Option<&'a [&'a str]>,
}

impl<'a> Parser<'a> {
    fn finish(&mut self) -> Result<Expr, ExprError> {
        let root = self.sum()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.expected(&["operator", "end of input"]));
        }
        Ok(Expr {
            vars: std::mem::take(&mut self.vars),
            root,
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expected(&self, what: &[&str]) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            expected: what.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, b: u8) -> Result<(), ExprError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            let s = (b as char).to_string();
            Err(self.expected(&[&format!("`{s}`")]))
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        const ATOM: &[&str] = &["number", "identifier", "`(`", "`-`"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.eat(b')')?;
                Ok(inner)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.ident(),
            _ => Err(self.expected(ATOM)),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: vec!["number".into()],
        })?;
        self.pos = i;
        // an `i` glued to the number makes it imaginary, unless it starts an identifier
        if self.pos < s.len()
            && s[self.pos] == b'i'
            && !s
                .get(self.pos + 1)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
            return Ok(Node::Num(C64::new(0.0, value)));
        }
        Ok(Node::Num(C64::new(value, 0.0)))
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if name == "i" {
            return Ok(Node::Num(C64::new(0.0, 1.0)));
        }
        if name == "pi" {
            return Ok(Node::Num(C64::new(std::f64::consts::PI, 0.0)));
        }
        if name == "pow" {
            self.eat(b'(')?;
            let a = self.sum()?;
            self.eat(b',')?;
            let b = self.sum()?;
            self.eat(b')')?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(a), Box::new(b)));
        }
        if let Some(f) = Func::lookup(name) {
            self.eat(b'(')?;
            let a = self.sum()?;
            self.eat(b')')?;
            return Ok(Node::Call(f, Box::new(a)));
        }
        let unknown = || ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        };
        if let Some(allowed) = self.allowed {
            return allowed
                .iter()
                .position(|v| *v == name)
                .map(Node::Var)
                .ok_or_else(unknown);
        }
        match self.vars.first() {
            Some(v) if v != name => Err(unknown()),
            Some(_) => Ok(Node::Var(0)),
            None => {
                self.vars.push(name.to_string());
                Ok(Node::Var(0))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

fn write_node(node: &Node, var: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(c) => {
            if c.im == 0.0 {
                write!(f, "{}", c.re)
            } else if c.re == 0.0 {
                write!(f, "{}i", c.im)
            } else {
                write!(f, "({}+{}i)", c.re, c.im)
            }
        }
        Node::Var(i) => write!(f, "{}", var.get(*i).map_or("x", |s| s.as_str())),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, var, f)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            write!(f, "(")?;
            write_node(a, var, f)?;
            write!(f, " {sym} ")?;
            write_node(b, var, f)?;
            write!(f, ")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, var, f)?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(v: f64) -> Box<Node> {
        Box::new(Node::Num(C64::new(v, 0.0)))
    }

    #[test]
    fn precedence_and_shape() {
        let e = parse("w^2 + 1").unwrap();
        assert_eq!(
            e.root,
            Node::Bin(
                BinOp::Add,
                Box::new(Node::Bin(BinOp::Pow, Box::new(Node::Var(0)), num(2.0))),
                num(1.0)
            )
        );
        let e = parse("exp(z/(2*0.5))").unwrap();
        assert_eq!(
            e.root,
            Node::Call(
                Func::Exp,
                Box::new(Node::Bin(
                    BinOp::Div,
                    Box::new(Node::Var(0)),
                    Box::new(Node::Bin(BinOp::Mul, num(2.0), num(0.5)))
                ))
            )
        );
        // -w^2 is -(w^2); powers associate to the right
        let e = parse("-w^2").unwrap();
        assert_eq!(e.eval(C64::new(3.0, 0.0)).unwrap(), C64::new(-9.0, 0.0));
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.constant_value().unwrap(), C64::new(512.0, 0.0));
        let e = parse("w^-1").unwrap();
        assert_eq!(e.eval(C64::new(4.0, 0.0)).unwrap(), C64::new(0.25, 0.0));
    }

    #[test]
    fn imaginary_literals() {
        let e = parse("2*i*w").unwrap();
        assert_eq!(e.eval(C64::new(3.0, 0.0)).unwrap(), C64::new(0.0, 6.0));
        let k = parse("0.5+2i").unwrap().constant_value().unwrap();
        assert_eq!(k, C64::new(0.5, 2.0));
        let k = parse("1.5e2").unwrap().constant_value().unwrap();
        assert_eq!(k, C64::new(150.0, 0.0));
    }

    #[test]
    fn errors_carry_location() {
        match parse("w + * 2") {
            Err(ExprError::Syntax { offset, expected }) => {
                assert_eq!(offset, 4);
                assert!(expected.contains(&"number".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("w + v") {
            Err(ExprError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "v");
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_in("q + 1", "w"),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse("(w"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("w)"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn cube_derivatives() {
        let e = parse("w^3").unwrap();
        let j = eval_jet(&e, C64::new(2.0, 0.0), 3).unwrap();
        let d: Vec<C64> = (0..4).map(|k| j.partial(&[k])).collect();
        assert_eq!(d, [8.0, 12.0, 12.0, 6.0].map(|v| C64::new(v, 0.0)));
    }

    #[test]
    fn log_derivatives() {
        let e = parse("ln(w)").unwrap();
        let j = eval_jet(&e, C64::new(1.0, 0.0), 2).unwrap();
        assert!((j.partial(&[0])).norm() < 1e-15);
        assert!((j.partial(&[1]) - 1.0).norm() < 1e-15);
        assert!((j.partial(&[2]) + 1.0).norm() < 1e-15);
        assert!((j.coeff(&[2]) + 0.5).norm() < 1e-15);
    }

    #[test]
    fn pow_call_and_variable_exponent() {
        let a = parse("pow(w, 0.5)").unwrap();
        let b = parse("sqrt(w)").unwrap();
        let x = C64::new(2.0, 0.3);
        assert!((a.eval(x).unwrap() - b.eval(x).unwrap()).norm() < 1e-14);
        let c = parse("w^w").unwrap();
        assert!((c.eval(x).unwrap() - x.powc(x)).norm() < 1e-13);
    }

    #[test]
    fn print_round_trip() {
        for s in [
            "w^2 + 1",
            "-w^-2*3.25 - sin(w)/cos(w)",
            "exp(2i*w) + ln(w + 0.1) ^ 2 ^ w",
            "pow(t, 1.5) - 1e-7*t",
            "pi*w",
        ] {
            let e = parse(s).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
    }

    #[test]
    fn several_variables() {
        let e = parse_vars("q*z^2 - exp(q)", &["q", "z"]).unwrap();
        let q = Jet::variable(2, 2, 0, C64::new(0.5, 0.0)).unwrap();
        let z = Jet::variable(2, 2, 1, C64::new(2.0, 0.0)).unwrap();
        let j = e.eval_multi(&[q, z]).unwrap();
        assert!((j.value() - (2.0 - 0.5f64.exp())).norm() < 1e-15);
        assert!((j.partial(&[1, 1]) - 4.0).norm() < 1e-14);
        assert!((j.partial(&[2, 0]) + 0.5f64.exp()).norm() < 1e-14);
        let again = parse_vars(&e.to_string(), &["q", "z"]).unwrap();
        assert_eq!(e, again);
        assert!(parse_vars("2*z", &["q", "z"]).unwrap().eval_on(&Jet::constant(1, 0, C64::new(1.0, 0.0)).unwrap()).is_err());
        assert!(!parse_vars("2*z", &["q", "z"]).unwrap().is_constant());
        assert!(parse_vars("3", &["q", "z"]).unwrap().is_constant());
    }

    #[test]
    fn evaluation_is_linear() {
        let f = parse("w^3 - 2*w").unwrap();
        let g = parse("exp(w)").unwrap();
        let h = parse("(2.5)*(w^3 - 2*w) + exp(w)").unwrap();
        let at = C64::new(0.7, 0.1);
        let jf = eval_jet(&f, at, 4).unwrap();
        let jg = eval_jet(&g, at, 4).unwrap();
        let jh = eval_jet(&h, at, 4).unwrap();
        let lin = jf * 2.5 + jg;
        for (a, b) in lin.coeffs().iter().zip(jh.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
