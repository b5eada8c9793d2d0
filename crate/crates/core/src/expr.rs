//! Small arithmetic grammar used by atlas files, metric entries and net
//! definitions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp log sqrt tanh pow`. Constants: `pi`. The symbol
//! `eps` is the net parameter; every other identifier must be one of the
//! declared coordinate names. Expressions evaluate on [`Jet`]s, so analytic
//! derivatives of any order come for free.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Eps,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parse `src` with coordinate names `vars` (positional).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse {
                pos: p.offset(),
                msg: "trailing input".into(),
            });
        }
        Ok(e)
    }

    /// True when the expression does not read any coordinate.
    pub fn is_coordinate_free(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Eps => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_coordinate_free(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_coordinate_free() && b.is_coordinate_free(),
        }
    }

    /// True when the expression reads `eps`.
    pub fn uses_eps(&self) -> bool {
        match self {
            Expr::Eps => true,
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_eps(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_eps() || b.uses_eps(),
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Num(_) | Expr::Eps => None,
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    pub fn eval<T: Scalar>(&self, x: &[T], eps: T) -> T {
        let sh = jet::shape(x.len(), 0);
        let seeds: Vec<Jet<T>> = x.iter().map(|&v| Jet::constant(&sh, v)).collect();
        self.eval_jet(&seeds, eps, &sh).value()
    }

    /// Evaluate on jets; `shape` is used for constants when `x` is empty.
    pub fn eval_jet<T: Scalar>(&self, x: &[Jet<T>], eps: T, shape: &Arc<jet::JetShape>) -> Jet<T> {
        match self {
            Expr::Num(v) => Jet::constant(shape, T::lit(*v)),
            Expr::Var(i) => x[*i].clone(),
            Expr::Eps => Jet::constant(shape, eps),
            Expr::Neg(a) => -a.eval_jet(x, eps, shape),
            Expr::Add(a, b) => a.eval_jet(x, eps, shape) + b.eval_jet(x, eps, shape),
            Expr::Sub(a, b) => a.eval_jet(x, eps, shape) - b.eval_jet(x, eps, shape),
            Expr::Mul(a, b) => a.eval_jet(x, eps, shape) * b.eval_jet(x, eps, shape),
            Expr::Div(a, b) => a.eval_jet(x, eps, shape) / b.eval_jet(x, eps, shape),
            Expr::Pow(a, b) => {
                let base = a.eval_jet(x, eps, shape);
                if b.is_coordinate_free() {
                    let p = b.eval::<T>(&[], eps);
                    if p.fract() == T::zero() && p.abs() <= T::lit(64.0) {
                        base.powi(p.to_i32().expect("small exponent"))
                    } else {
                        base.powf(p)
                    }
                } else {
                    let p = b.eval_jet(x, eps, shape);
                    (p * base.ln()).exp()
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval_jet(x, eps, shape);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Tanh => v.tanh(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
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
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if c == '−' {
            out.push((i, Tok::Op('-')));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.0)
            .unwrap_or_else(|| self.tokens.last().map(|t| t.0 + 1).unwrap_or(0))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                pos: self.offset(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek_op() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek_op() {
            match c {
                '*' => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                '/' => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
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
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = self.offset();
        let tok = self.tokens.get(self.pos).cloned().ok_or(Error::Parse {
            pos: start,
            msg: "unexpected end of input".into(),
        })?;
        self.pos += 1;
        match tok.1 {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse {
                pos: start,
                msg: format!("unexpected `{c}`"),
            }),
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return call(&name, args, start);
                }
                if name == "eps" {
                    return Ok(Expr::Eps);
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                self.vars
                    .iter()
                    .position(|v| *v == name)
                    .map(Expr::Var)
                    .ok_or(Error::UnknownIdentifier(name))
            }
        }
    }
}

fn call(name: &str, mut args: Vec<Expr>, pos: usize) -> Result<Expr> {
    let arity = |n: usize, args: &Vec<Expr>| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Parse {
                pos,
                msg: format!("`{name}` takes {n} argument(s)"),
            })
        }
    };
    let f = match name {
        "sin" => Func::Sin,
        "cos" => Func::Cos,
        "exp" => Func::Exp,
        "log" | "ln" => Func::Log,
        "sqrt" => Func::Sqrt,
        "tanh" => Func::Tanh,
        "pow" => {
            arity(2, &args)?;
            let e = args.pop().expect("two args");
            let b = args.pop().expect("two args");
            return Ok(Expr::Pow(Box::new(b), Box::new(e)));
        }
        other => return Err(Error::UnknownIdentifier(other.to_string())),
    };
    arity(1, &args)?;
    Ok(Expr::Call(f, Box::new(args.pop().expect("one arg"))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("2 + 3 * x ^ 2 - -1", &["x"]).unwrap();
        assert_eq!(e.eval(&[2.0], 0.5), 2.0 + 12.0 + 1.0);
        let e = Expr::parse("eps^-3 * sin(x)", &["x"]).unwrap();
        let v = e.eval(&[1.0f64], 0.5);
        assert!((v - 8.0 * 1.0f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn pow_forms_agree() {
        let a = Expr::parse("pow(x, 2.5)", &["x"]).unwrap();
        let b = Expr::parse("x^2.5", &["x"]).unwrap();
        assert_eq!(a.eval(&[1.3f64], 1.0), b.eval(&[1.3f64], 1.0));
        let c = Expr::parse("x^x", &["x"]).unwrap();
        assert!((c.eval(&[2.0f64], 1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn scientific_literals_and_constants() {
        let e = Expr::parse("1e-3 * pi + 2.5E2", &[]).unwrap();
        assert!((e.eval::<f64>(&[], 1.0) - (1e-3 * std::f64::consts::PI + 250.0)).abs() < 1e-12);
        assert!(e.is_coordinate_free());
        assert!(!e.uses_eps());
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(Expr::parse("x +", &["x"]), Err(Error::Parse { .. })));
        assert_eq!(
            Expr::parse("z", &["x"]),
            Err(Error::UnknownIdentifier("z".into()))
        );
        assert!(matches!(Expr::parse("foo(x)", &["x"]), Err(Error::UnknownIdentifier(_))));
        assert!(matches!(Expr::parse("sin(x, x)", &["x"]), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x $ 2", &["x"]), Err(Error::Parse { .. })));
    }

    #[test]
    fn jets_through_expressions() {
        let e = Expr::parse("x*y", &["x", "y"]).unwrap();
        let seeds = Jet::<f64>::seed(&[2.0, 3.0], 2);
        let j = e.eval_jet(&seeds, 1.0, seeds[0].shape());
        assert_eq!(j.derivative(&[1, 0]), 3.0);
        assert_eq!(j.derivative(&[1, 1]), 1.0);
    }
}
