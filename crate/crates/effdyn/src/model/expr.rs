//! A minimal arithmetic-expression grammar for user-defined potentials.
//!
//! Supported: numeric literals, variables `q1..qd`, `+ - * / ^`, `exp(..)`,
//! `cos(..)`, `sin(..)` and parentheses. Gradients come from forward-mode
//! dual numbers, Hessians from nested duals, so derivative callbacks are
//! exact to machine precision.

use crate::{Error, Result};

/// Numeric trait that f64 and dual numbers share, so one evaluator serves
/// values, gradients and Hessians.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn exp(self) -> Self;
    fn cos(self) -> Self;
    fn sin(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self {
        let mut acc = Self::from_f64(1.0);
        let mut base = self;
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 {
            Self::from_f64(1.0) / acc
        } else {
            acc
        }
    }
    fn powf(self, p: f64) -> Self {
        (self.ln() * Self::from_f64(p)).exp()
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

/// First-order dual number a + b*eps with eps^2 = 0.
#[derive(Debug, Clone, Copy)]
pub struct Dual<T> {
    pub re: T,
    pub du: T,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(x: f64) -> Self {
        Dual { re: T::from_f64(x), du: T::from_f64(0.0) }
    }
    pub fn var(re: T) -> Self {
        Dual { re, du: T::from_f64(1.0) }
    }
    pub fn lift(re: T) -> Self {
        Dual { re, du: T::from_f64(0.0) }
    }
}

impl<T: Scalar> std::ops::Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, du: self.du + o.du }
    }
}
impl<T: Scalar> std::ops::Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, du: self.du - o.du }
    }
}
impl<T: Scalar> std::ops::Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, du: self.re * o.du + self.du * o.re }
    }
}
impl<T: Scalar> std::ops::Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let re = self.re / o.re;
        Dual { re, du: (self.du - re * o.du) / o.re }
    }
}
impl<T: Scalar> std::ops::Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual { re: e, du: self.du * e }
    }
    fn cos(self) -> Self {
        Dual { re: self.re.cos(), du: -(self.du * self.re.sin()) }
    }
    fn sin(self) -> Self {
        Dual { re: self.re.sin(), du: self.du * self.re.cos() }
    }
    fn ln(self) -> Self {
        Dual { re: self.re.ln(), du: self.du / self.re }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a literal exponent; integer exponents stay exact for
    /// negative bases.
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
}

impl Expr {
    pub fn eval<T: Scalar>(&self, vars: &[T]) -> T {
        match self {
            Expr::Num(x) => T::from_f64(*x),
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, p) => {
                let base = a.eval(vars);
                if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                    base.powi(*p as i32)
                } else {
                    base.powf(*p)
                }
            }
            Expr::Neg(a) => -a.eval(vars),
            Expr::Exp(a) => a.eval(vars).exp(),
            Expr::Cos(a) => a.eval(vars).cos(),
            Expr::Sin(a) => a.eval(vars).sin(),
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        self.eval(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let d = q.len();
        (0..d)
            .map(|i| {
                let vars: Vec<Dual<f64>> = q
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| if i == j { Dual::var(x) } else { Dual::lift(x) })
                    .collect();
                self.eval(&vars).du
            })
            .collect()
    }

    pub fn hessian(&self, q: &[f64]) -> crate::linalg::Mat {
        let d = q.len();
        let mut h = crate::linalg::Mat::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let vars: Vec<Dual<Dual<f64>>> = q
                    .iter()
                    .enumerate()
                    .map(|(l, &x)| {
                        let inner = if l == i { Dual::var(x) } else { Dual::lift(x) };
                        if l == j {
                            Dual::var(inner)
                        } else {
                            Dual::lift(inner)
                        }
                    })
                    .collect();
                let v = self.eval(&vars).du.du;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

// --- parser -----------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

/// Parse an expression over variables `q1..q<dim>`.
pub fn parse(src: &str, dim: usize) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Expr(format!("trailing input at byte {}", p.pos)));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let p = self.number()?;
            return Ok(Expr::Pow(Box::new(base), if neg { -p } else { p }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Expr("expected ')'".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Num(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.ident();
                match name.as_str() {
                    "exp" | "cos" | "sin" => {
                        if self.peek() != Some(b'(') {
                            return Err(Error::Expr(format!("expected '(' after {name}")));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        if self.peek() != Some(b')') {
                            return Err(Error::Expr("expected ')'".into()));
                        }
                        self.pos += 1;
                        Ok(match name.as_str() {
                            "exp" => Expr::Exp(Box::new(arg)),
                            "cos" => Expr::Cos(Box::new(arg)),
                            _ => Expr::Sin(Box::new(arg)),
                        })
                    }
                    _ => {
                        if let Some(idx) = name.strip_prefix('q').and_then(|s| s.parse::<usize>().ok()) {
                            if idx == 0 || idx > self.dim {
                                return Err(Error::Expr(format!(
                                    "variable {name} out of range for dimension {}",
                                    self.dim
                                )));
                            }
                            Ok(Expr::Var(idx - 1))
                        } else {
                            Err(Error::Expr(format!("unknown identifier {name}")))
                        }
                    }
                }
            }
            other => Err(Error::Expr(format!("unexpected input {other:?}"))),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || self.src[self.pos] == b'e'
                || self.src[self.pos] == b'E'
                || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    && self.pos > start
                    && (self.src[self.pos - 1] == b'e' || self.src[self.pos - 1] == b'E')))
        {
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse::<f64>().map_err(|_| Error::Expr(format!("bad number literal '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = parse("q1^2/2 + q2^2/(2*0.1) + 0.5*q1*q2", 2).unwrap();
        let v = e.value(&[1.0, 2.0]);
        assert!((v - (0.5 + 20.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_hand_derivative() {
        let e = parse("exp(q1) * cos(q2) + q1^3", 2).unwrap();
        let q = [0.3, 1.1];
        let g = e.gradient(&q);
        assert!((g[0] - (q[0].exp() * q[1].cos() + 3.0 * q[0] * q[0])).abs() < 1e-12);
        assert!((g[1] - (-q[0].exp() * q[1].sin())).abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_hand_derivative() {
        let e = parse("q1^2*q2 + sin(q2)", 2).unwrap();
        let q = [0.7, -0.4];
        let h = e.hessian(&q);
        assert!((h[(0, 0)] - 2.0 * q[1]).abs() < 1e-12);
        assert!((h[(0, 1)] - 2.0 * q[0]).abs() < 1e-12);
        assert!((h[(1, 1)] - (-q[1].sin())).abs() < 1e-12);
    }

    #[test]
    fn negative_base_integer_power() {
        let e = parse("(q1^2 - 1)^2", 1).unwrap();
        assert!((e.value(&[0.5]) - 0.5625).abs() < 1e-12);
        let g = e.gradient(&[0.5]);
        // d/dq (q^2-1)^2 = 4q(q^2-1) = 4*0.5*(-0.75) = -1.5
        assert!((g[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse("q1 +", 1).is_err());
        assert!(parse("q3", 2).is_err());
        assert!(parse("tan(q1)", 1).is_err());
    }
}
