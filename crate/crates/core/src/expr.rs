//! Small arithmetic expression language over `x`, `y`, `t` with symbolic
//! differentiation. Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 't' | 'pi' | 'e' | call | '(' expr ')'
//! call  := ('sin' | 'cos' | 'exp' | 'ln' | 'sqrt') '(' expr ')' | 'pow' '(' expr ',' expr ')'
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

use Expr::*;

fn num(v: f64) -> Expr {
    Num(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (e, Num(z)) if z == 0.0 => e,
        (Num(z), e) if z == 0.0 => neg(e),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
        (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) if y != 0.0 => Num(x / y),
        (Num(z), _) if z == 0.0 => Num(0.0),
        (e, Num(o)) if o == 1.0 => e,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

#[allow(clippy::redundant_guards)]
fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x.powf(y)),
        (_, Num(z)) if z == 0.0 => Num(1.0),
        (e, Num(o)) if o == 1.0 => e,
        (a, b) => Pow(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => Num(-x),
        Neg(e) => *e,
        e => Neg(Box::new(e)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Num(x) => Num(f.apply(x)),
        e => Call(f, Box::new(e)),
    }
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected {:?} in `{src}`",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn constant(v: f64) -> Expr {
        Num(v)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Num(v) => *v,
            Var(Var::X) => x,
            Var(Var::Y) => y,
            Var(Var::T) => t,
            Neg(a) => -a.eval(x, y, t),
            Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Sub(a, b) => a.eval(x, y, t) - b.eval(x, y, t),
            Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Div(a, b) => a.eval(x, y, t) / b.eval(x, y, t),
            Pow(a, b) => {
                let base = a.eval(x, y, t);
                match **b {
                    Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x, y, t)),
                }
            }
            Call(f, a) => f.apply(a.eval(x, y, t)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Num(_) => false,
            Var(w) => *w == v,
            Neg(a) | Call(_, a) => a.depends_on(v),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Symbolic partial derivative, simplified by constant folding.
    pub fn diff(&self, v: Var) -> Expr {
        if !self.depends_on(v) {
            return num(0.0);
        }
        match self {
            Num(_) => num(0.0),
            Var(w) => num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                pow((**b).clone(), num(2.0)),
            ),
            Pow(a, b) => {
                if !b.depends_on(v) {
                    // d(u^c) = c u^(c-1) u'
                    let c = (**b).clone();
                    mul(
                        mul(c.clone(), pow((**a).clone(), sub(c, num(1.0)))),
                        a.diff(v),
                    )
                } else {
                    // d(u^w) = u^w (w' ln u + w u' / u)
                    let u = (**a).clone();
                    let w = (**b).clone();
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(v), call(Func::Ln, u.clone())),
                            div(mul(w, a.diff(v)), u),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.diff(v);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => call(Func::Exp, (**a).clone()),
                    Func::Ln => div(num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }

    /// Multiplies by a constant, folding when possible.
    pub fn scaled(&self, c: f64) -> Expr {
        mul(num(c), self.clone())
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Add(..) | Sub(..) => 1,
        Mul(..) | Div(..) => 2,
        Neg(_) => 3,
        Pow(..) => 4,
        Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Num(v) => write!(f, "{v:?}"),
            Var(Var::X) => write!(f, "x"),
            Var(Var::Y) => write!(f, "y"),
            Var(Var::T) => write!(f, "t"),
            Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " * ")?;
                wrap(f, b, 3)
            }
            Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " / ")?;
                wrap(f, b, 3)
            }
            Pow(a, b) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, b, 4)
            }
            Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}` at {i}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{c}` at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Add(Box::new(lhs), Box::new(rhs))
            } else {
                Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expr("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Expr(format!("unexpected `{c}`"))),
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Var(Var::X)),
                "y" => Ok(Var(Var::Y)),
                "t" => Ok(Var(Var::T)),
                "pi" => Ok(Num(std::f64::consts::PI)),
                "e" => Ok(Num(std::f64::consts::E)),
                "sin" | "cos" | "exp" | "ln" | "log" | "sqrt" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(match name.as_str() {
                        "sin" => Call(Func::Sin, Box::new(a)),
                        "cos" => Call(Func::Cos, Box::new(a)),
                        "exp" => Call(Func::Exp, Box::new(a)),
                        "sqrt" => Pow(Box::new(a), Box::new(Num(0.5))),
                        _ => Call(Func::Ln, Box::new(a)),
                    })
                }
                "pow" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    Ok(Pow(Box::new(a), Box::new(b)))
                }
                other => Err(Error::Expr(format!("unknown identifier `{other}`"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y, t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("2 - 3 - 4", 0.0, 0.0, 0.0), -5.0);
        assert_eq!(ev("1.5e2 + x", 1.0, 0.0, 0.0), 151.0);
        assert!((ev("sin(pi * x) * exp(t)", 0.5, 0.0, 1.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(ev("pow(x, 2) + sqrt(y)", 3.0, 4.0, 0.0), 11.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "foo(x)", "(x", "x $ y", "pow(x)", "z"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn derivative_examples() {
        let e = Expr::parse("x^2 * y + sin(t)").unwrap();
        assert_eq!(e.diff(Var::X).eval(3.0, 2.0, 0.0), 12.0);
        assert_eq!(e.diff(Var::Y).eval(3.0, 2.0, 0.0), 9.0);
        assert_eq!(e.diff(Var::T).eval(3.0, 2.0, 0.0), 1.0);
        let e = Expr::parse("x^x").unwrap();
        let d = e.diff(Var::X).eval(2.0, 0.0, 0.0);
        assert!((d - 4.0 * (2f64.ln() + 1.0)).abs() < 1e-12);
        assert_eq!(
            Expr::parse("3 * y").unwrap().diff(Var::X),
            Expr::constant(0.0)
        );
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "-(x + 1)^2",
            "x - (y - t)",
            "x / (y * t)",
            "2^-x",
            "exp(-t) * sin(pi * x)",
            "(-2)^x",
        ] {
            let e = Expr::parse(s).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            for &(x, y, t) in &[(0.3, 0.7, 0.2), (1.1, 0.5, 2.0)] {
                let (a, b) = (e.eval(x, y, t), back.eval(x, y, t));
                assert!(a == b || (a.is_nan() && b.is_nan()), "{s} -> {e}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = String> {
            prop_oneof![
                Just("x".to_string()),
                Just("y".to_string()),
                Just("t".to_string()),
                (0.5..3.0f64).prop_map(|v| format!("{v:.3}")),
            ]
        }

        fn smooth_expr() -> impl Strategy<Value = String> {
            leaf().prop_recursive(4, 24, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| format!("({a} / (2 + cos({b})))")),
                    inner.clone().prop_map(|a| format!("sin({a})")),
                    inner.clone().prop_map(|a| format!("exp(cos({a}))")),
                    inner.clone().prop_map(|a| format!("({a})^2")),
                    inner.prop_map(|a| format!("pow(2 + sin({a}), 1.5)")),
                ]
            })
        }

        proptest! {
            #[test]
            fn derivative_matches_finite_difference(src in smooth_expr(), x in 0.1..0.9f64, y in 0.1..0.9f64, t in 0.1..0.9f64) {
                let e = Expr::parse(&src).unwrap();
                for (v, (dx, dy, dt)) in [(Var::X, (1.0, 0.0, 0.0)), (Var::Y, (0.0, 1.0, 0.0)), (Var::T, (0.0, 0.0, 1.0))] {
                    let h = 1e-3;
                    let f = |s: f64| e.eval(x + s * dx, y + s * dy, t + s * dt);
                    let fd = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
                    let exact = e.diff(v).eval(x, y, t);
                    prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{src}: {fd} vs {exact}");
                }
            }
        }
    }
}
