//! Scalar expressions over chart coordinates `x1..x_{2n}`, evaluated as jets.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, `pi`, and the
//! functions `log`/`ln`, `exp`, `sqrt`, `pow(a, b)`.

use std::fmt;

use crate::error::{GeomError, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Log(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "pow({a}, {b})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

impl Expr {
    pub fn parse(src: &str, num_vars: usize) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            num_vars,
        };
        let expr = parser.expr()?;
        if let Some((tok, col)) = parser.tokens.get(parser.pos) {
            return Err(GeomError::Parse(format!(
                "unexpected `{tok}` at column {col}"
            )));
        }
        Ok(expr)
    }

    /// Largest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Log(a) | Expr::Exp(a) | Expr::Sqrt(a) => a.arity(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.arity().max(b.arity()),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            _ => None,
        }
    }

    pub fn jet(&self, vars: &[Jet]) -> Result<Jet> {
        let n = vars[0].num_vars();
        let k = vars[0].order();
        Ok(match self {
            Expr::Num(v) => Jet::constant(n, k, *v),
            Expr::Var(i) => vars
                .get(*i)
                .cloned()
                .ok_or_else(|| GeomError::Dimension(format!("x{} out of range", i + 1)))?,
            Expr::Neg(a) => -a.jet(vars)?,
            Expr::Add(a, b) => a.jet(vars)?.try_add(&b.jet(vars)?)?,
            Expr::Sub(a, b) => a.jet(vars)?.try_sub(&b.jet(vars)?)?,
            Expr::Mul(a, b) => a.jet(vars)?.try_mul(&b.jet(vars)?)?,
            Expr::Div(a, b) => a.jet(vars)?.try_div(&b.jet(vars)?)?,
            Expr::Pow(a, b) => {
                let base = a.jet(vars)?;
                match b.constant_value() {
                    Some(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32)?,
                    Some(e) => base.powf(e)?,
                    None => base.pow(&b.jet(vars)?)?,
                }
            }
            Expr::Log(a) => a.jet(vars)?.ln()?,
            Expr::Exp(a) => a.jet(vars)?.exp(),
            Expr::Sqrt(a) => a.jet(vars)?.sqrt()?,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let vars = Jet::variables(x, 0);
        Ok(self.jet(&vars)?.value())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
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
                .map_err(|_| GeomError::Parse(format!("bad number `{text}` at column {col}")))?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(GeomError::Parse(format!(
                "unexpected character `{c}` at column {col}"
            )));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    num_vars: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| self.tokens.last().map(|(_, c)| c + 1).unwrap_or(1))
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(GeomError::Parse(format!(
                "expected `{op}` at column {}",
                self.column()
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
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
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.column();
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(GeomError::Parse(format!(
                "unexpected end of expression at column {col}"
            )));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, col),
            Tok::Op(c) => Err(GeomError::Parse(format!(
                "unexpected `{c}` at column {col}"
            ))),
        }
    }

    fn ident(&mut self, name: &str, col: usize) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if idx == 0 || idx > self.num_vars {
                return Err(GeomError::Parse(format!(
                    "variable `{name}` at column {col} outside x1..x{}",
                    self.num_vars
                )));
            }
            return Ok(Expr::Var(idx - 1));
        }
        self.expect('(')?;
        let first = self.expr()?;
        let e = match name {
            "log" | "ln" => Expr::Log(Box::new(first)),
            "exp" => Expr::Exp(Box::new(first)),
            "sqrt" => Expr::Sqrt(Box::new(first)),
            "pow" => {
                self.expect(',')?;
                let second = self.expr()?;
                Expr::Pow(Box::new(first), Box::new(second))
            }
            other => {
                return Err(GeomError::Parse(format!(
                    "unknown function `{other}` at column {col}"
                )))
            }
        };
        self.expect(')')?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("log(1 + x1^2 + x2*x2) - 2*exp(-x1)/sqrt(4)", 2).unwrap();
        let v = e.eval(&[0.5, -1.0]).unwrap();
        let expect = (1.0f64 + 0.25 + 1.0).ln() - (-0.5f64).exp();
        assert!((v - expect).abs() < 1e-14);
        let p = Expr::parse("pow(x1, 3) + 2^-1", 1).unwrap();
        assert!((p.eval(&[2.0]).unwrap() - 8.5).abs() < 1e-14);
    }

    #[test]
    fn reports_columns() {
        let err = Expr::parse("x1 + * 2", 2).unwrap_err();
        assert!(
            matches!(err, GeomError::Parse(ref m) if m.contains("column 6")),
            "{err}"
        );
        let err = Expr::parse("x3", 2).unwrap_err();
        assert!(matches!(err, GeomError::Parse(ref m) if m.contains("x3")));
        assert!(Expr::parse("foo(x1)", 1).is_err());
        assert!(Expr::parse("(x1", 1).is_err());
        assert!(Expr::parse("x1 $", 1).is_err());
    }

    #[test]
    fn jet_of_expression_matches_direct_jet() {
        let e = Expr::parse("x1*x1*x2 + exp(x2)", 2).unwrap();
        let vars = Jet::variables(&[0.3, 0.2], 4);
        let j = e.jet(&vars).unwrap();
        let direct = &(&(&vars[0] * &vars[0]) * &vars[1]) + &vars[1].exp();
        for (a, b) in j.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
